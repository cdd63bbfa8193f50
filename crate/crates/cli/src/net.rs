//! Endpoints run by `aifml net`.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;

use aifml_core::netlink::{
    session_rows, CrashPoint, Delivery, DeviceRole, DeviceSim, Endpoint, FileStore, Handled,
    MemoryStore, NetError, RaaService, Roster, SessionStore, Transport,
};
use aifml_core::raa::{write_log, RaaConfig};

/// A device simulator that appends each observation to a file (and
/// stdout) before the delivery is acknowledged. An existing file is the
/// device's memory of what it has already shown.
pub struct LoggedDevice {
    sim: DeviceSim,
    file: Option<File>,
    echo: bool,
}

impl LoggedDevice {
    pub fn open(role: DeviceRole, class_id: &str, log: Option<&Path>, echo: bool) -> io::Result<Self> {
        let (lines, file) = match log {
            Some(p) => {
                let lines = match fs::read_to_string(p) {
                    Ok(text) => text.lines().filter(|l| !l.is_empty()).map(str::to_owned).collect(),
                    Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
                    Err(e) => return Err(e),
                };
                (lines, Some(OpenOptions::new().create(true).append(true).open(p)?))
            }
            None => (Vec::new(), None),
        };
        Ok(Self {
            sim: DeviceSim::from_log(role, class_id, lines),
            file,
            echo,
        })
    }

    pub fn lines(&self) -> &[String] {
        self.sim.lines()
    }
}

impl Endpoint for LoggedDevice {
    fn filters(&self) -> Vec<String> {
        self.sim.filters()
    }

    fn handle(
        &mut self,
        d: &Delivery,
        out: &mut dyn Transport,
        crash_at: Option<CrashPoint>,
    ) -> Result<Handled, NetError> {
        let handled = self.sim.handle(d, out, crash_at)?;
        if handled == Handled::Processed {
            let line = self.sim.lines().last().expect("a processed delivery adds a line");
            if let Some(f) = &mut self.file {
                writeln!(f, "{line}")?;
                f.sync_data()?;
            }
            if self.echo {
                println!("{line}");
            }
        }
        Ok(handled)
    }
}

/// The RAA service over either a journal file or memory.
pub enum Service {
    Durable(RaaService<FileStore>),
    Volatile(RaaService<MemoryStore>),
}

impl Service {
    pub fn open(class_id: &str, store: Option<&Path>, config: RaaConfig) -> Result<Self, NetError> {
        Ok(match store {
            Some(p) => Service::Durable(RaaService::new(class_id, FileStore::open(p, config)?)),
            None => Service::Volatile(RaaService::new(class_id, MemoryStore::new(config))),
        })
    }

    fn store(&self) -> &dyn SessionStore {
        match self {
            Service::Durable(s) => s.store(),
            Service::Volatile(s) => s.store(),
        }
    }

    /// Writes the session log CSV, everyone in the class team.
    pub fn export(&self, class_id: &str, path: &Path) -> io::Result<usize> {
        let rows = session_rows(self.store(), &Roster::single(class_id));
        let file = File::create(path)?;
        write_log(&rows, io::BufWriter::new(file)).map_err(|e| io::Error::other(e.to_string()))?;
        Ok(rows.len())
    }
}

impl Endpoint for Service {
    fn filters(&self) -> Vec<String> {
        match self {
            Service::Durable(s) => s.filters(),
            Service::Volatile(s) => s.filters(),
        }
    }

    fn handle(
        &mut self,
        d: &Delivery,
        out: &mut dyn Transport,
        crash_at: Option<CrashPoint>,
    ) -> Result<Handled, NetError> {
        match self {
            Service::Durable(s) => s.handle(d, out, crash_at),
            Service::Volatile(s) => s.handle(d, out, crash_at),
        }
    }
}
