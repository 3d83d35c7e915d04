//! Plot-ready CSV emitters with stable, documented schemas. All files are
//! UTF-8 with LF line endings and a header row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::trainer::IterationReport;

pub struct MetricsWriter {
    w: BufWriter<File>,
}

impl MetricsWriter {
    pub const HEADER: &'static str = "iteration,env_steps,mean_train_reward,mean_eval_reward,policy_loss,value_loss,clip_fraction,entropy,dead_particle_count,resample_events";

    pub fn create(path: &Path) -> Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{}", Self::HEADER)?;
        Ok(Self { w })
    }

    pub fn write_row(&mut self, r: &IterationReport) -> Result<()> {
        writeln!(
            self.w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.iteration,
            r.env_steps,
            r.mean_train_reward,
            r.mean_eval_reward,
            r.stats.policy_loss,
            r.stats.value_loss,
            r.stats.clip_fraction,
            r.stats.entropy,
            r.dead_particle_count,
            r.events.len(),
        )?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

pub struct ParticlesWriter {
    w: BufWriter<File>,
}

impl ParticlesWriter {
    pub const HEADER: &'static str = "iteration,dimension,particle,mu,xi,mean_weight";

    pub fn create(path: &Path) -> Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{}", Self::HEADER)?;
        Ok(Self { w })
    }

    pub fn write_rows(&mut self, r: &IterationReport) -> Result<()> {
        for p in &r.particles {
            writeln!(
                self.w,
                "{},{},{},{},{},{}",
                r.iteration, p.dim, p.particle, p.mu, p.xi, p.mean_weight
            )?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

pub struct EventsWriter {
    w: BufWriter<File>,
}

impl EventsWriter {
    pub const HEADER: &'static str = "iteration,dimension,dead,target,old_bias,new_bias";

    pub fn create(path: &Path) -> Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{}", Self::HEADER)?;
        Ok(Self { w })
    }

    pub fn write_rows(&mut self, r: &IterationReport) -> Result<()> {
        for e in &r.events {
            writeln!(
                self.w,
                "{},{},{},{},{},{}",
                r.iteration, e.dim, e.dead, e.target, e.old_bias, e.new_bias
            )?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}
