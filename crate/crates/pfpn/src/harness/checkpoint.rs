//! Parameter checkpoints: a flat list of named float arrays in a
//! length-prefixed binary container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   5 bytes   "PFPN1"
//! repeat  until EOF:
//!   name_len   u32
//!   name       name_len bytes of UTF-8
//!   count      u64
//!   values     count x f64 (little-endian)
//! ```
//!
//! A head checkpoint carries the sections `meta` (kind code, components,
//! action dims, obs dim, hidden sizes), `trunk.<i>.weight` / `trunk.<i>.bias`,
//! `final.weight` / `final.bias`, `particles.mu` / `particles.log_xi` for the
//! particle head, and `value.<i>.weight` / `value.<i>.bias` for the value
//! network (same hidden sizes as the trunk).

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{Activation, Mlp};
use crate::policy::{HeadKind, PolicyHead};

pub const MAGIC: &[u8; 5] = b"PFPN1";

pub type Sections = Vec<(String, Vec<f64>)>;

pub fn write_checkpoint(path: &Path, sections: &Sections) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(MAGIC)?;
    for (name, values) in sections {
        file.write_all(&(name.len() as u32).to_le_bytes())?;
        file.write_all(name.as_bytes())?;
        file.write_all(&(values.len() as u64).to_le_bytes())?;
        for v in values {
            file.write_all(&v.to_le_bytes())?;
        }
    }
    file.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Sections> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 5];
    file.read_exact(&mut magic).map_err(|_| Error::Checkpoint {
        section: "magic".into(),
        message: "file shorter than the magic header".into(),
    })?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint {
            section: "magic".into(),
            message: format!("bad magic {magic:?}, expected {MAGIC:?}"),
        });
    }
    let mut sections = Sections::new();
    loop {
        let mut len4 = [0u8; 4];
        match file.read_exact(&mut len4) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let name_len = u32::from_le_bytes(len4) as usize;
        let mut name_bytes = vec![0u8; name_len];
        file.read_exact(&mut name_bytes).map_err(|_| Error::Checkpoint {
            section: format!("entry {}", sections.len()),
            message: "truncated section name".into(),
        })?;
        let name = String::from_utf8(name_bytes).map_err(|_| Error::Checkpoint {
            section: format!("entry {}", sections.len()),
            message: "section name is not UTF-8".into(),
        })?;
        let mut len8 = [0u8; 8];
        file.read_exact(&mut len8).map_err(|_| Error::Checkpoint {
            section: name.clone(),
            message: "truncated element count".into(),
        })?;
        let count = u64::from_le_bytes(len8) as usize;
        let mut values = Vec::with_capacity(count);
        let mut buf = [0u8; 8];
        for _ in 0..count {
            file.read_exact(&mut buf).map_err(|_| Error::Checkpoint {
                section: name.clone(),
                message: "truncated float data".into(),
            })?;
            values.push(f64::from_le_bytes(buf));
        }
        sections.push((name, values));
    }
    Ok(sections)
}

fn kind_code(kind: HeadKind) -> f64 {
    match kind {
        HeadKind::Pfpn => 0.0,
        HeadKind::Gaussian => 1.0,
        HeadKind::Discrete => 2.0,
        HeadKind::Gmm => 3.0,
    }
}

fn kind_from_code(code: f64) -> Result<HeadKind> {
    match code as i64 {
        0 => Ok(HeadKind::Pfpn),
        1 => Ok(HeadKind::Gaussian),
        2 => Ok(HeadKind::Discrete),
        3 => Ok(HeadKind::Gmm),
        other => Err(Error::Checkpoint {
            section: "meta".into(),
            message: format!("unknown head kind code {other}"),
        }),
    }
}

fn mlp_sections(prefix: &str, mlp: &Mlp<f64>, out: &mut Sections) {
    for (i, layer) in mlp.layers().iter().enumerate() {
        out.push((
            format!("{prefix}.{i}.weight"),
            layer.weight.as_slice().to_vec(),
        ));
        out.push((format!("{prefix}.{i}.bias"), layer.bias.clone()));
    }
}

/// Serializes a head and its value network into named sections.
pub fn head_to_sections(head: &PolicyHead<f64>, value: &Mlp<f64>) -> Sections {
    let mut meta = vec![
        kind_code(head.kind()),
        head.components() as f64,
        head.action_dims() as f64,
        head.obs_dim() as f64,
    ];
    for layer in head.trunk().layers() {
        meta.push(layer.out_dim() as f64);
    }
    let mut sections = vec![("meta".to_string(), meta)];
    mlp_sections("trunk", head.trunk(), &mut sections);
    sections.push((
        "final.weight".to_string(),
        head.final_weight().as_slice().to_vec(),
    ));
    sections.push(("final.bias".to_string(), head.final_bias().to_vec()));
    if let Some(p) = head.particles() {
        sections.push(("particles.mu".to_string(), p.mu_flat().to_vec()));
        sections.push(("particles.log_xi".to_string(), p.log_xi_flat().to_vec()));
    }
    mlp_sections("value", value, &mut sections);
    sections
}

fn take<'a>(sections: &'a Sections, name: &str) -> Result<&'a [f64]> {
    sections
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, v)| v.as_slice())
        .ok_or_else(|| Error::Checkpoint {
            section: name.to_string(),
            message: "section missing".into(),
        })
}

fn fill_mlp(prefix: &str, mlp: &mut Mlp<f64>, sections: &Sections) -> Result<()> {
    for (i, layer) in mlp.layers_mut().iter_mut().enumerate() {
        let name = format!("{prefix}.{i}.weight");
        let w = take(sections, &name)?;
        if w.len() != layer.weight.as_slice().len() {
            return Err(Error::Checkpoint {
                section: name,
                message: format!(
                    "expected {} values, found {}",
                    layer.weight.as_slice().len(),
                    w.len()
                ),
            });
        }
        layer.weight.as_mut_slice().copy_from_slice(w);
        let name = format!("{prefix}.{i}.bias");
        let b = take(sections, &name)?;
        if b.len() != layer.bias.len() {
            return Err(Error::Checkpoint {
                section: name,
                message: format!("expected {} values, found {}", layer.bias.len(), b.len()),
            });
        }
        layer.bias.copy_from_slice(b);
    }
    Ok(())
}

/// Rebuilds a head and value network from checkpoint sections.
pub fn sections_to_head(sections: &Sections) -> Result<(PolicyHead<f64>, Mlp<f64>)> {
    let meta = take(sections, "meta")?;
    if meta.len() < 5 {
        return Err(Error::Checkpoint {
            section: "meta".into(),
            message: format!("expected at least 5 values, found {}", meta.len()),
        });
    }
    let kind = kind_from_code(meta[0])?;
    let n = meta[1] as usize;
    let m = meta[2] as usize;
    let obs = meta[3] as usize;
    let hidden: Vec<usize> = meta[4..].iter().map(|h| *h as usize).collect();

    // shapes come from the constructors; every parameter is then overwritten
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut head = match kind {
        HeadKind::Pfpn => PolicyHead::pfpn(obs, &hidden, n, m, &mut rng)?,
        HeadKind::Gaussian => PolicyHead::gaussian(obs, &hidden, m, 1.0, &mut rng)?,
        HeadKind::Discrete => PolicyHead::discrete(obs, &hidden, n, m, &mut rng)?,
        HeadKind::Gmm => PolicyHead::gmm(obs, &hidden, n, m, &mut rng)?,
    };
    {
        let trunk = head.trunk_mut();
        fill_mlp("trunk", trunk, sections)?;
    }
    let fw = take(sections, "final.weight")?;
    if fw.len() != head.final_weight().as_slice().len() {
        return Err(Error::Checkpoint {
            section: "final.weight".into(),
            message: format!(
                "expected {} values, found {}",
                head.final_weight().as_slice().len(),
                fw.len()
            ),
        });
    }
    head.final_weight_mut().as_mut_slice().copy_from_slice(fw);
    let fb = take(sections, "final.bias")?;
    if fb.len() != head.final_bias().len() {
        return Err(Error::Checkpoint {
            section: "final.bias".into(),
            message: format!(
                "expected {} values, found {}",
                head.final_bias().len(),
                fb.len()
            ),
        });
    }
    head.final_bias_mut().copy_from_slice(fb);
    if kind == HeadKind::Pfpn {
        let mu = take(sections, "particles.mu")?.to_vec();
        let log_xi = take(sections, "particles.log_xi")?.to_vec();
        let p = head.particles_mut().unwrap();
        if mu.len() != p.mu_flat().len() || log_xi.len() != p.log_xi_flat().len() {
            return Err(Error::Checkpoint {
                section: "particles.mu".into(),
                message: "particle array length mismatch".into(),
            });
        }
        p.mu_flat_mut().copy_from_slice(&mu);
        p.log_xi_flat_mut().copy_from_slice(&log_xi);
    }

    let mut value_sizes = vec![obs];
    value_sizes.extend_from_slice(&hidden);
    value_sizes.push(1);
    let mut value = Mlp::he_init(&value_sizes, Activation::Identity, &mut rng);
    fill_mlp("value", &mut value, sections)?;
    Ok((head, value))
}

/// Convenience: serialize and write a head checkpoint.
pub fn save_head(path: &Path, head: &PolicyHead<f64>, value: &Mlp<f64>) -> Result<()> {
    write_checkpoint(path, &head_to_sections(head, value))
}

/// Convenience: read and rebuild a head checkpoint.
pub fn load_head(path: &Path) -> Result<(PolicyHead<f64>, Mlp<f64>)> {
    sections_to_head(&read_checkpoint(path)?)
}
