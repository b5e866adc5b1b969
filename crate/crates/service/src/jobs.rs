use std::collections::HashMap;

use cnr_core::pipeline::{JobState, JobStatus, Progress};
use parking_lot::RwLock;

/// In-memory job table. Articles without an entry are Pending, or Done when
/// a processed document is already on disk (the caller decides).
#[derive(Default)]
pub struct JobBoard {
    jobs: RwLock<HashMap<String, JobStatus>>,
}

pub enum Claim {
    /// The caller must start a run.
    Started(JobStatus),
    /// A run is already in progress or finished.
    Existing(JobStatus),
}

impl JobBoard {
    pub fn get(&self, id: &str) -> Option<JobStatus> {
        self.jobs.read().get(id).cloned()
    }

    /// Atomically starts a job unless one is running. Finished jobs are only
    /// restarted when `rerun` is set; failed jobs always restart.
    pub fn claim(&self, id: &str, total: usize, baseline: JobStatus, rerun: bool) -> Claim {
        let mut jobs = self.jobs.write();
        let current = jobs.get(id).cloned().unwrap_or(baseline);
        let restart = match current.state {
            JobState::Pending | JobState::Failed { .. } => true,
            JobState::Done => rerun,
            _ => false,
        };
        if !restart {
            return Claim::Existing(current);
        }
        let status = JobStatus {
            article_id: id.to_string(),
            state: JobState::Classifying,
            progress: Progress {
                processed: 0,
                total,
            },
        };
        jobs.insert(id.to_string(), status.clone());
        Claim::Started(status)
    }

    /// Records a state change from a running job. States never move backward
    /// and progress never decreases within a state.
    pub fn advance(&self, id: &str, state: JobState, progress: Progress) {
        let mut jobs = self.jobs.write();
        let Some(job) = jobs.get_mut(id) else {
            return;
        };
        if job.state.is_terminal() {
            return;
        }
        let forward = state.rank() > job.state.rank()
            || (state.rank() == job.state.rank() && progress.processed >= job.progress.processed);
        if forward {
            job.state = state;
            job.progress = progress;
        }
    }

    pub fn finish(&self, id: &str, state: JobState) {
        if let Some(job) = self.jobs.write().get_mut(id) {
            job.state = state;
        }
    }
}
