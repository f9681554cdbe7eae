//! stderr logging (filtered by `RUST_LOG`, default `info`) that can also be
//! copied into the current run directory.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::sync::{Mutex, OnceLock};

use log::{Log, Metadata, Record};

struct RunLogger {
    stderr: env_logger::Logger,
    file: Mutex<Option<File>>,
}

static LOGGER: OnceLock<RunLogger> = OnceLock::new();

impl Log for RunLogger {
    fn enabled(&self, metadata: &Metadata<'_>) -> bool {
        self.stderr.enabled(metadata)
    }

    fn log(&self, record: &Record<'_>) {
        if !self.stderr.matches(record) {
            return;
        }
        self.stderr.log(record);
        if let Some(f) = self.file.lock().unwrap_or_else(|e| e.into_inner()).as_mut() {
            let _ = writeln!(f, "[{} {}] {}", record.level(), record.target(), record.args());
        }
    }

    fn flush(&self) {
        self.stderr.flush();
        if let Some(f) = self.file.lock().unwrap_or_else(|e| e.into_inner()).as_mut() {
            let _ = f.flush();
        }
    }
}

/// Installs the logger. Safe to call more than once.
pub fn init() {
    let logger = LOGGER.get_or_init(|| RunLogger {
        stderr: env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).build(),
        file: Mutex::new(None),
    });
    if log::set_logger(logger).is_ok() {
        log::set_max_level(logger.stderr.filter());
    }
}

/// Copies subsequent log records into `path`. Does nothing when the logger
/// was never installed (e.g. when commands are called from tests).
pub fn attach(path: &Path) {
    let Some(logger) = LOGGER.get() else {
        return;
    };
    match File::create(path) {
        Ok(f) => *logger.file.lock().unwrap_or_else(|e| e.into_inner()) = Some(f),
        Err(e) => log::warn!("cannot write log file {}: {e}", path.display()),
    }
}
