use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::thread;

use crate::error::Result;

pub fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

pub fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Comma-joined values in shortest round-trip form.
pub fn row(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Runs `f(0..count)` on worker threads and returns results in index order.
/// Every index owns its RNG stream, so output does not depend on the worker count.
pub fn par_map<T: Send, F: Fn(usize) -> T + Sync>(count: usize, f: F) -> Vec<T> {
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(count.max(1));
    if workers <= 1 {
        return (0..count).map(f).collect();
    }
    let mut slots: Vec<Option<T>> = (0..count).map(|_| None).collect();
    thread::scope(|scope| {
        let chunks: Vec<_> = slots.chunks_mut(count.div_ceil(workers)).enumerate().collect();
        let chunk_len = count.div_ceil(workers);
        for (c, chunk) in chunks {
            let f = &f;
            scope.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(f(c * chunk_len + i));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("worker filled every slot")).collect()
}
