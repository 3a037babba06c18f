//! Ordered multi-object editing.
//!
//! A session holds a base image and a plan of edit steps. Applying the plan
//! folds [`Pipeline::transfer_material`] over the steps in order, each one
//! consuming the previous output. Done steps always form a prefix of the
//! plan; rollback shortens that prefix and leaves the history log alone.
//! Every image is referenced by its id in an [`AssetStore`].

mod persist;

pub use persist::SessionRepository;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Stage};
use crate::generation::{EditRecord, GenerationParams, MaterialExemplar, Pipeline};
use crate::imaging::CropBox;
use crate::store::{AssetKind, AssetStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepStatus {
    Pending,
    Done,
    Failed,
}

/// Framing hints applied to the exemplar asset before encoding.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExemplarHints {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crop: Option<CropBox>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_hint: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text_hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditStep {
    pub id: String,
    /// Mask asset id.
    pub region: String,
    /// Exemplar asset id.
    pub exemplar: String,
    #[serde(default)]
    pub hints: ExemplarHints,
    pub params: GenerationParams,
    pub status: StepStatus,
    /// Result asset id, present exactly when done.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditPlan {
    pub base_image: String,
    pub steps: Vec<EditStep>,
}

/// One completed step execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub seq: u64,
    pub step_index: usize,
    pub step_id: String,
    pub result: String,
    pub record: EditRecord,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: String,
    pub plan: EditPlan,
    pub history: Vec<HistoryEntry>,
    /// Mask assets produced for this session by segmentation.
    #[serde(default)]
    pub masks: Vec<String>,
    pub created: DateTime<Utc>,
    pub updated: DateTime<Utc>,
}

/// Why a step failed, as recorded by [`SessionState::apply_plan`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFailure {
    pub step: usize,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    pub message: String,
}

/// What an [`SessionState::apply_plan`] call did.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ApplyOutcome {
    pub executed: Vec<usize>,
    /// First step that failed; later steps were left pending.
    pub failed: Option<StepFailure>,
}

/// Fresh random seed for steps submitted without one.
pub fn random_seed() -> u64 {
    uuid::Uuid::new_v4().as_u64_pair().0
}

impl SessionState {
    pub fn new(base_image: impl Into<String>) -> Self {
        let now = Utc::now();
        SessionState {
            id: uuid::Uuid::new_v4().to_string(),
            plan: EditPlan {
                base_image: base_image.into(),
                steps: Vec::new(),
            },
            history: Vec::new(),
            masks: Vec::new(),
            created: now,
            updated: now,
        }
    }

    fn touch(&mut self) {
        self.updated = Utc::now();
    }

    pub fn steps(&self) -> &[EditStep] {
        &self.plan.steps
    }

    pub fn done_count(&self) -> usize {
        self.plan
            .steps
            .iter()
            .take_while(|s| s.status == StepStatus::Done)
            .count()
    }

    /// Asset id of the base image folded through the done steps.
    pub fn current_image(&self) -> &str {
        self.plan.steps[..self.done_count()]
            .last()
            .and_then(|s| s.result.as_deref())
            .unwrap_or(&self.plan.base_image)
    }

    /// Appends a pending step; its seed is fixed from here on. Returns the
    /// step index.
    pub fn add_step(
        &mut self,
        region: impl Into<String>,
        exemplar: impl Into<String>,
        hints: ExemplarHints,
        params: GenerationParams,
    ) -> Result<usize> {
        params.validate()?;
        self.plan.steps.push(EditStep {
            id: uuid::Uuid::new_v4().to_string(),
            region: region.into(),
            exemplar: exemplar.into(),
            hints,
            params,
            status: StepStatus::Pending,
            result: None,
            error: None,
        });
        self.touch();
        Ok(self.plan.steps.len() - 1)
    }

    /// Assigns a new seed to a step that has not run successfully.
    pub fn reroll_seed(&mut self, index: usize, seed: Option<u64>) -> Result<u64> {
        let step = self
            .plan
            .steps
            .get_mut(index)
            .ok_or_else(|| Error::invalid(format!("no step {index}")))?;
        if step.status == StepStatus::Done {
            return Err(Error::invalid(format!(
                "step {index} is done; roll back before rerolling"
            )));
        }
        let seed = seed.unwrap_or_else(random_seed);
        step.params.seed = seed;
        step.status = StepStatus::Pending;
        step.error = None;
        self.touch();
        Ok(seed)
    }

    /// Reorders the plan: `permutation[i]` is the old index of the step
    /// that ends up at position `i`. Done steps must stay in place.
    pub fn reorder_steps(&mut self, permutation: &[usize]) -> Result<()> {
        let n = self.plan.steps.len();
        if permutation.len() != n {
            return Err(Error::InvalidReorder(format!(
                "{} indices for {n} steps",
                permutation.len()
            )));
        }
        let mut seen = vec![false; n];
        for &p in permutation {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidReorder(format!(
                    "{permutation:?} is not a permutation of 0..{n}"
                )));
            }
        }
        for (new, &old) in permutation.iter().enumerate() {
            if new != old && self.plan.steps[old].status == StepStatus::Done {
                return Err(Error::InvalidReorder(format!("step {old} is done and cannot move")));
            }
            if new != old && self.plan.steps[new].status == StepStatus::Done {
                return Err(Error::InvalidReorder(format!(
                    "step {new} is done and cannot be displaced"
                )));
            }
        }
        let mut old: Vec<Option<EditStep>> = self.plan.steps.drain(..).map(Some).collect();
        self.plan.steps = permutation
            .iter()
            .map(|&i| old[i].take().expect("checked permutation"))
            .collect();
        self.touch();
        Ok(())
    }

    /// Keeps the first `keep` steps done and resets the rest to pending.
    pub fn rollback(&mut self, keep: usize) -> Result<()> {
        let done = self.done_count();
        if keep > done {
            return Err(Error::invalid(format!(
                "cannot roll back to {keep}: only {done} steps are done"
            )));
        }
        for step in &mut self.plan.steps[keep..] {
            step.status = StepStatus::Pending;
            step.result = None;
            step.error = None;
        }
        self.touch();
        Ok(())
    }

    /// Runs pending (and previously failed) steps through `up_to`
    /// inclusive, or the whole plan when `None`.
    pub fn apply_plan(
        &mut self,
        pipeline: &Pipeline,
        store: &AssetStore,
        up_to: Option<usize>,
    ) -> Result<ApplyOutcome> {
        self.apply_plan_observed(pipeline, store, up_to, &mut |_, _| {})
    }

    /// As [`SessionState::apply_plan`], reporting `(step index, stage)` as
    /// each pipeline stage finishes.
    pub fn apply_plan_observed(
        &mut self,
        pipeline: &Pipeline,
        store: &AssetStore,
        up_to: Option<usize>,
        observer: &mut dyn FnMut(usize, Stage),
    ) -> Result<ApplyOutcome> {
        let n = self.plan.steps.len();
        if n == 0 {
            return Ok(ApplyOutcome::default());
        }
        let last = match up_to {
            Some(k) if k >= n => return Err(Error::invalid(format!("step {k} out of range for {n} steps"))),
            Some(k) => k,
            None => n - 1,
        };
        let start = self.done_count();
        if !store.contains(&self.plan.base_image) {
            return Err(Error::Plan {
                step: start,
                message: format!("base image {} is missing", self.plan.base_image),
            });
        }
        for i in start..=last {
            let s = &self.plan.steps[i];
            for (what, id) in [("region", &s.region), ("exemplar", &s.exemplar)] {
                if !store.contains(id) {
                    return Err(Error::Plan {
                        step: i,
                        message: format!("{what} asset {id} is missing"),
                    });
                }
            }
        }

        let mut outcome = ApplyOutcome::default();
        for i in start..=last {
            let input_id = self.current_image().to_string();
            match self.run_step(pipeline, store, i, &input_id, observer) {
                Ok((result, record)) => {
                    let step = &mut self.plan.steps[i];
                    step.status = StepStatus::Done;
                    step.result = Some(result.clone());
                    step.error = None;
                    let entry = HistoryEntry {
                        seq: self.history.len() as u64,
                        step_index: i,
                        step_id: step.id.clone(),
                        result,
                        record,
                        at: Utc::now(),
                    };
                    self.history.push(entry);
                    outcome.executed.push(i);
                }
                Err(e) => {
                    log::warn!("session {} step {i} failed: {e}", self.id);
                    let step = &mut self.plan.steps[i];
                    step.status = StepStatus::Failed;
                    step.result = None;
                    step.error = Some(e.to_string());
                    outcome.failed = Some(StepFailure {
                        step: i,
                        kind: e.kind().to_string(),
                        stage: e.stage(),
                        message: e.to_string(),
                    });
                    break;
                }
            }
        }
        self.touch();
        Ok(outcome)
    }

    fn run_step(
        &self,
        pipeline: &Pipeline,
        store: &AssetStore,
        index: usize,
        input_id: &str,
        observer: &mut dyn FnMut(usize, Stage),
    ) -> Result<(String, EditRecord)> {
        let step = &self.plan.steps[index];
        let input = store.load_raster(input_id)?;
        let mask = store.load_mask(&step.region)?;
        let mut exemplar = MaterialExemplar::new(store.load_raster(&step.exemplar)?);
        exemplar.crop = step.hints.crop;
        exemplar.scale_hint = step.hints.scale_hint;
        exemplar.text_hint = step.hints.text_hint.clone();
        let result = pipeline.transfer_material_observed(&input, &mask, &exemplar, &step.params, &mut |stage| {
            observer(index, stage)
        })?;
        let stored = store.put_raster(&result.image, AssetKind::Result)?;
        Ok((stored.id, result.record()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(n: usize) -> SessionState {
        let mut s = SessionState::new("base");
        for i in 0..n {
            s.add_step(
                format!("m{i}"),
                "e",
                ExemplarHints::default(),
                GenerationParams::with_seed(i as u64),
            )
            .unwrap();
        }
        s
    }

    fn mark_done(s: &mut SessionState, k: usize) {
        for (i, step) in s.plan.steps.iter_mut().take(k).enumerate() {
            step.status = StepStatus::Done;
            step.result = Some(format!("r{i}"));
        }
    }

    #[test]
    fn reorder_rules() {
        let mut s = state(3);
        s.reorder_steps(&[0, 1, 2]).unwrap();
        s.reorder_steps(&[1, 0, 2]).unwrap();
        assert_eq!(s.plan.steps[0].region, "m1");
        assert!(s.reorder_steps(&[0, 0, 1]).is_err());
        assert!(s.reorder_steps(&[0, 1]).is_err());

        mark_done(&mut s, 1);
        assert!(matches!(s.reorder_steps(&[1, 0, 2]), Err(Error::InvalidReorder(_))));
        s.reorder_steps(&[0, 2, 1]).unwrap();
        assert_eq!(s.plan.steps[1].region, "m2");
    }

    #[test]
    fn rollback_resets_tail_and_current_image() {
        let mut s = state(3);
        mark_done(&mut s, 2);
        assert_eq!(s.current_image(), "r1");
        s.rollback(2).unwrap();
        assert_eq!(s.current_image(), "r1");
        s.rollback(1).unwrap();
        assert_eq!(s.current_image(), "r0");
        assert_eq!(s.plan.steps[1].status, StepStatus::Pending);
        assert!(s.rollback(2).is_err());
        s.rollback(0).unwrap();
        assert_eq!(s.current_image(), "base");
    }

    #[test]
    fn reroll_only_before_done() {
        let mut s = state(2);
        mark_done(&mut s, 1);
        assert!(s.reroll_seed(0, Some(5)).is_err());
        assert_eq!(s.reroll_seed(1, Some(5)).unwrap(), 5);
        assert_eq!(s.plan.steps[1].params.seed, 5);
        assert!(s.reroll_seed(9, None).is_err());
    }
}
