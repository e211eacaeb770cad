//! In-memory job registry.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    /// Allowed moves: queued → running → done | failed, plus queued → failed.
    pub fn can_move_to(self, next: JobStatus) -> bool {
        use JobStatus::*;
        matches!((self, next), (Queued, Running) | (Queued, Failed) | (Running, Done) | (Running, Failed))
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }
}

/// One generated idea as served by `GET /jobs/{id}/ideas`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdeaEntry {
    pub sample_index: usize,
    pub text: String,
    pub is_unique: bool,
    pub min_score: Option<f64>,
    pub argmin_pair: Option<(String, String)>,
    pub token_count: usize,
}

#[derive(Debug, Clone)]
pub struct Job {
    pub status: JobStatus,
    pub completed: usize,
    pub total: usize,
    pub history: Vec<JobStatus>,
    pub ideas: Option<Vec<IdeaEntry>>,
    pub error: Option<String>,
}

impl Job {
    pub fn progress(&self) -> f64 {
        if self.status == JobStatus::Done {
            1.0
        } else {
            self.completed as f64 / self.total.max(1) as f64
        }
    }
}

#[derive(Debug, Default)]
pub struct JobRegistry {
    jobs: HashMap<u64, Job>,
    next_id: u64,
}

impl JobRegistry {
    pub fn create(&mut self, total: usize) -> u64 {
        self.next_id += 1;
        let id = self.next_id;
        self.jobs.insert(
            id,
            Job {
                status: JobStatus::Queued,
                completed: 0,
                total,
                history: vec![JobStatus::Queued],
                ideas: None,
                error: None,
            },
        );
        id
    }

    pub fn get(&self, id: u64) -> Option<&Job> {
        self.jobs.get(&id)
    }

    /// Applies a status change; illegal moves are ignored and logged.
    pub fn transition(&mut self, id: u64, next: JobStatus) -> bool {
        let Some(job) = self.jobs.get_mut(&id) else { return false };
        if !job.status.can_move_to(next) {
            log::warn!("job {id}: ignored transition {:?} -> {next:?}", job.status);
            return false;
        }
        job.status = next;
        job.history.push(next);
        true
    }

    /// Progress never moves backwards.
    pub fn advance(&mut self, id: u64, completed: usize) {
        if let Some(job) = self.jobs.get_mut(&id) {
            job.completed = job.completed.max(completed.min(job.total));
        }
    }

    pub fn finish(&mut self, id: u64, ideas: Vec<IdeaEntry>) {
        if self.transition(id, JobStatus::Done) {
            let job = self.jobs.get_mut(&id).expect("job exists");
            job.completed = job.total;
            job.ideas = Some(ideas);
        }
    }

    pub fn fail(&mut self, id: u64, error: String) {
        if self.transition(id, JobStatus::Failed) {
            self.jobs.get_mut(&id).expect("job exists").error = Some(error);
        }
    }
}
