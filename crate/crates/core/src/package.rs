//! Deployable archives and debug-mode output files.
//!
//! Archives are ZIP files with two stored (uncompressed) entries, the unit
//! source and `config.json`, written with fixed timestamps so equal inputs
//! give equal bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transform::{FunctionUnit, RewrittenModule};

pub const MIN_TIMEOUT_S: u32 = 1;
pub const MAX_TIMEOUT_S: u32 = 300;
pub const MIN_MEMORY_MB: u32 = 128;
pub const MAX_MEMORY_MB: u32 = 1536;
pub const CONFIG_ENTRY: &str = "config.json";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PackageError {
    #[error("{field} = {value} is outside {min}..={max}")]
    OutOfLimits {
        field: &'static str,
        value: u32,
        min: u32,
        max: u32,
    },
    #[error("config names {config:?} but the unit is {unit:?}")]
    NameMismatch { unit: String, config: String },
    #[error("malformed archive: {0}")]
    Malformed(String),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitConfig {
    pub name: String,
    pub handler: String,
    pub memory_mb: u32,
    pub timeout_s: u32,
}

impl UnitConfig {
    pub fn new(name: &str) -> Self {
        UnitConfig {
            name: name.to_string(),
            handler: format!("{name}.lambda_handler"),
            memory_mb: MIN_MEMORY_MB,
            timeout_s: MAX_TIMEOUT_S,
        }
    }

    pub fn validate(&self) -> Result<(), PackageError> {
        let check = |field, value, min, max| {
            if (min..=max).contains(&value) {
                Ok(())
            } else {
                Err(PackageError::OutOfLimits { field, value, min, max })
            }
        };
        check("timeout_s", self.timeout_s, MIN_TIMEOUT_S, MAX_TIMEOUT_S)?;
        check("memory_mb", self.memory_mb, MIN_MEMORY_MB, MAX_MEMORY_MB)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}

/// ZIP bytes holding `<unit>.py` then `config.json`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitArchive {
    pub bytes: Vec<u8>,
}

/// Contents of an archive after unpacking and validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unpacked {
    pub source: String,
    pub config: UnitConfig,
}

pub fn package_unit(unit: &FunctionUnit, config: &UnitConfig) -> Result<UnitArchive, PackageError> {
    pack(&unit.unit_name, &unit.source, config)
}

/// Packs a source text under `name` with `config`.
pub fn pack(name: &str, source: &str, config: &UnitConfig) -> Result<UnitArchive, PackageError> {
    config.validate()?;
    if config.name != name {
        return Err(PackageError::NameMismatch {
            unit: name.to_string(),
            config: config.name.clone(),
        });
    }
    let entries = [
        (format!("{name}.py"), source.as_bytes().to_vec()),
        (CONFIG_ENTRY.to_string(), config.to_json().into_bytes()),
    ];
    Ok(UnitArchive {
        bytes: zip::write(&entries),
    })
}

impl UnitArchive {
    /// Raw entries in stored order.
    pub fn entries(&self) -> Result<Vec<(String, Vec<u8>)>, PackageError> {
        zip::read(&self.bytes).map_err(PackageError::Malformed)
    }

    pub fn unpack(&self) -> Result<Unpacked, PackageError> {
        let entries = self.entries()?;
        let [(source_name, source), (config_name, config)] = entries.as_slice() else {
            return Err(PackageError::Malformed(format!(
                "expected 2 entries, found {}",
                entries.len()
            )));
        };
        if config_name != CONFIG_ENTRY {
            return Err(PackageError::Malformed(format!(
                "second entry is {config_name:?}, not {CONFIG_ENTRY}"
            )));
        }
        let config: UnitConfig =
            serde_json::from_slice(config).map_err(|e| PackageError::Malformed(format!("{CONFIG_ENTRY}: {e}")))?;
        config.validate()?;
        if source_name != &format!("{}.py", config.name) {
            return Err(PackageError::NameMismatch {
                unit: source_name.trim_end_matches(".py").to_string(),
                config: config.name,
            });
        }
        let source =
            String::from_utf8(source.clone()).map_err(|_| PackageError::Malformed("source is not UTF-8".into()))?;
        Ok(Unpacked { source, config })
    }
}

/// Writes `<outdir>/<module>_rewritten.py` for each module and
/// `<outdir>/units/<unit>.py` for each unit; returns the paths in that order.
pub fn write_debug_outputs(
    rewritten: &[RewrittenModule],
    units: &[FunctionUnit],
    outdir: &Path,
) -> Result<Vec<PathBuf>, PackageError> {
    let write = |path: PathBuf, text: &str| -> Result<PathBuf, PackageError> {
        let io = |e: std::io::Error| PackageError::Io {
            path: path.clone(),
            message: e.to_string(),
        };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io)?;
        }
        fs::write(&path, text).map_err(io)?;
        Ok(path)
    };
    let mut out = Vec::new();
    for m in rewritten {
        out.push(write(outdir.join(format!("{}_rewritten.py", m.name)), &m.source)?);
    }
    for u in units {
        out.push(write(
            outdir.join("units").join(format!("{}.py", u.unit_name)),
            &u.source,
        )?);
    }
    Ok(out)
}

/// Minimal ZIP container: stored entries, no extra fields, no comments.
mod zip {
    const LOCAL: u32 = 0x0403_4b50;
    const CENTRAL: u32 = 0x0201_4b50;
    const END: u32 = 0x0605_4b50;
    const VERSION: u16 = 20;
    // 1980-01-01 00:00:00, the earliest instant DOS timestamps can express.
    const DOS_TIME: u16 = 0;
    const DOS_DATE: u16 = (1 << 5) | 1;

    fn u16le(out: &mut Vec<u8>, v: u16) {
        out.extend_from_slice(&v.to_le_bytes());
    }

    fn u32le(out: &mut Vec<u8>, v: u32) {
        out.extend_from_slice(&v.to_le_bytes());
    }

    pub fn write(entries: &[(String, Vec<u8>)]) -> Vec<u8> {
        let mut out = Vec::new();
        let mut central = Vec::new();
        for (name, data) in entries {
            let offset = out.len() as u32;
            let crc = crc32fast::hash(data);
            let size = data.len() as u32;
            u32le(&mut out, LOCAL);
            u16le(&mut out, VERSION);
            u16le(&mut out, 0); // flags
            u16le(&mut out, 0); // stored
            u16le(&mut out, DOS_TIME);
            u16le(&mut out, DOS_DATE);
            u32le(&mut out, crc);
            u32le(&mut out, size);
            u32le(&mut out, size);
            u16le(&mut out, name.len() as u16);
            u16le(&mut out, 0);
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(data);

            u32le(&mut central, CENTRAL);
            u16le(&mut central, VERSION);
            u16le(&mut central, VERSION);
            u16le(&mut central, 0);
            u16le(&mut central, 0);
            u16le(&mut central, DOS_TIME);
            u16le(&mut central, DOS_DATE);
            u32le(&mut central, crc);
            u32le(&mut central, size);
            u32le(&mut central, size);
            u16le(&mut central, name.len() as u16);
            u16le(&mut central, 0); // extra
            u16le(&mut central, 0); // comment
            u16le(&mut central, 0); // disk
            u16le(&mut central, 0); // internal attrs
            u32le(&mut central, 0); // external attrs
            u32le(&mut central, offset);
            central.extend_from_slice(name.as_bytes());
        }
        let cd_offset = out.len() as u32;
        let cd_size = central.len() as u32;
        out.extend_from_slice(&central);
        u32le(&mut out, END);
        u16le(&mut out, 0);
        u16le(&mut out, 0);
        u16le(&mut out, entries.len() as u16);
        u16le(&mut out, entries.len() as u16);
        u32le(&mut out, cd_size);
        u32le(&mut out, cd_offset);
        u16le(&mut out, 0);
        out
    }

    struct Cursor<'a> {
        bytes: &'a [u8],
        pos: usize,
    }

    impl<'a> Cursor<'a> {
        fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
            let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
            let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
            let s = &self.bytes[self.pos..end];
            self.pos = end;
            Ok(s)
        }

        fn u16(&mut self) -> Result<u16, String> {
            Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
        }

        fn u32(&mut self) -> Result<u32, String> {
            Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
        }
    }

    pub fn read(bytes: &[u8]) -> Result<Vec<(String, Vec<u8>)>, String> {
        if bytes.len() < 22 {
            return Err("too short for a ZIP file".into());
        }
        let end = (0..=bytes.len() - 22)
            .rev()
            .find(|&i| bytes[i..i + 4] == END.to_le_bytes())
            .ok_or("no end of central directory record")?;
        let mut c = Cursor { bytes, pos: end + 10 };
        let count = c.u16()? as usize;
        let _cd_size = c.u32()?;
        let cd_offset = c.u32()? as usize;
        let mut cd = Cursor { bytes, pos: cd_offset };
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            if cd.u32()? != CENTRAL {
                return Err("bad central directory signature".into());
            }
            cd.take(6)?;
            let method = cd.u16()?;
            cd.take(4)?;
            let crc = cd.u32()?;
            let packed = cd.u32()? as usize;
            let size = cd.u32()? as usize;
            let name_len = cd.u16()? as usize;
            let extra_len = cd.u16()? as usize;
            let comment_len = cd.u16()? as usize;
            cd.take(8)?;
            let offset = cd.u32()? as usize;
            let name = String::from_utf8(cd.take(name_len)?.to_vec()).map_err(|_| "entry name is not UTF-8")?;
            cd.take(extra_len + comment_len)?;
            if method != 0 || packed != size {
                return Err(format!("entry {name:?} is compressed"));
            }
            let mut local = Cursor { bytes, pos: offset };
            if local.u32()? != LOCAL {
                return Err(format!("bad local header for {name:?}"));
            }
            local.take(22)?;
            let lname = local.u16()? as usize;
            let lextra = local.u16()? as usize;
            local.take(lname + lextra)?;
            let data = local.take(size)?.to_vec();
            if crc32fast::hash(&data) != crc {
                return Err(format!("checksum mismatch in {name:?}"));
            }
            out.push((name, data));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_limits() {
        let c = UnitConfig::new("fib_fib");
        assert_eq!(
            serde_json::to_value(&c).unwrap(),
            serde_json::json!({"name": "fib_fib", "handler": "fib_fib.lambda_handler", "memory_mb": 128, "timeout_s": 300})
        );
        let bad = UnitConfig {
            timeout_s: 301,
            ..c.clone()
        };
        assert!(matches!(
            bad.validate(),
            Err(PackageError::OutOfLimits { field: "timeout_s", .. })
        ));
        assert!(UnitConfig {
            timeout_s: 0,
            ..c.clone()
        }
        .validate()
        .is_err());
        assert!(UnitConfig {
            memory_mb: 1537,
            ..c.clone()
        }
        .validate()
        .is_err());
        assert!(UnitConfig {
            memory_mb: 1536,
            timeout_s: 1,
            ..c
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn pack_round_trip() {
        let config = UnitConfig::new("u");
        let a = pack("u", "def lambda_handler(event, context):\n    return 1\n", &config).unwrap();
        let b = pack("u", "def lambda_handler(event, context):\n    return 1\n", &config).unwrap();
        assert_eq!(a, b);
        let names: Vec<String> = a.entries().unwrap().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, vec!["u.py", "config.json"]);
        let un = a.unpack().unwrap();
        assert_eq!(un.config, config);
        assert!(un.source.starts_with("def lambda_handler"));
        assert!(matches!(
            pack("u", "", &UnitConfig::new("v")),
            Err(PackageError::NameMismatch { .. })
        ));
    }

    #[test]
    fn malformed_archives_are_rejected() {
        assert!(UnitArchive {
            bytes: b"not a zip".to_vec()
        }
        .unpack()
        .is_err());
        let mut a = pack("u", "x = 1\n", &UnitConfig::new("u")).unwrap();
        a.bytes[40] ^= 0xff;
        assert!(a.unpack().is_err());
        let three = zip::write(&[
            ("u.py".into(), vec![]),
            ("config.json".into(), vec![]),
            ("x".into(), vec![]),
        ]);
        assert!(UnitArchive { bytes: three }.unpack().is_err());
    }

    #[test]
    fn zip_layout_is_standard() {
        let bytes = zip::write(&[("a.py".into(), b"hi".to_vec())]);
        assert_eq!(&bytes[..4], b"PK\x03\x04");
        assert_eq!(&bytes[bytes.len() - 22..bytes.len() - 18], b"PK\x05\x06");
        assert_eq!(zip::read(&bytes).unwrap(), vec![("a.py".to_string(), b"hi".to_vec())]);
    }
}
