//! Deterministic rule-based backend reading task and scene ground truth.

use std::collections::BTreeSet;

use super::{
    DecisionBackend, DecisionError, LocateContext, LocateDecision, StatusContext, StatusDecision, Subtask,
    FRONTIER_TARGET,
};
use crate::scene::object_within_success_radius;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleBackend {
    /// Success radius used when judging completion.
    pub eps: f64,
    /// Target-memory entries within this radius count as visits to a frontier.
    pub visit_radius: f64,
    /// Frontiers closer than this rank after farther ones.
    pub min_frontier_distance: f64,
    /// Frontiers this close to an excluded position are skipped.
    pub frontier_exclusion_radius: f64,
}

impl Default for OracleBackend {
    fn default() -> Self {
        Self::new(1.5)
    }
}

impl OracleBackend {
    pub fn new(eps: f64) -> Self {
        Self { eps, visit_radius: 1.0, min_frontier_distance: 1.0, frontier_exclusion_radius: 1.0 }
    }
}

impl DecisionBackend for OracleBackend {
    fn name(&self) -> &str {
        "oracle"
    }

    fn break_instruction(
        &self,
        instruction: &str,
        authored: &[Subtask],
    ) -> Result<(Vec<Subtask>, Vec<bool>), DecisionError> {
        let subtasks: Vec<Subtask> = if authored.is_empty() {
            instruction
                .split(';')
                .map(str::trim)
                .filter(|c| !c.is_empty())
                .map(|c| Subtask { requirement: c.into(), preference: String::new(), satisfying_classes: vec![] })
                .collect()
        } else {
            authored.to_vec()
        };
        if subtasks.is_empty() {
            return Err(DecisionError::DecompositionFailed { attempts: 1 });
        }
        let status = vec![false; subtasks.len()];
        Ok((subtasks, status))
    }

    fn locate_next(&self, ctx: &LocateContext<'_>) -> Result<LocateDecision, DecisionError> {
        let excluded = |class: &str, p| ctx.extra_info.is_some_and(|x| x.excludes(class, p));
        for (i, sub) in ctx.subtasks.iter().enumerate() {
            if ctx.status.get(i).copied().unwrap_or(true) {
                continue;
            }
            let best = ctx
                .bank
                .object_memory
                .iter()
                .enumerate()
                .filter(|(_, e)| sub.satisfying_classes.contains(&e.class) && !excluded(&e.class, e.center))
                .min_by(|a, b| {
                    let da = a.1.center.distance(ctx.agent);
                    let db = b.1.center.distance(ctx.agent);
                    da.total_cmp(&db).then(a.0.cmp(&b.0))
                });
            if let Some((k, e)) = best {
                return Ok(LocateDecision {
                    target_object: e.class.clone(),
                    target_position: e.center,
                    rationale: format!("memory entry {k} ({}) satisfies subtask {i}", e.class),
                });
            }
        }

        let visits = |p: crate::geometry::Point2| {
            ctx.bank.target_memory.iter().filter(|t| t.position.distance(p) <= self.visit_radius).count()
        };
        let best = ctx
            .frontiers
            .iter()
            .enumerate()
            .filter(|(_, f)| {
                ctx.extra_info
                    .is_none_or(|x| f.position.distance(x.position) > self.frontier_exclusion_radius)
            })
            .filter(|(_, f)| !excluded(FRONTIER_TARGET, f.position))
            .map(|(k, f)| {
                let d = f.position.distance(ctx.agent);
                (visits(f.position), d < self.min_frontier_distance, d, k, f)
            })
            .min_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)).then(a.3.cmp(&b.3)));
        match best {
            Some((v, _, _, k, f)) => Ok(LocateDecision {
                target_object: FRONTIER_TARGET.into(),
                target_position: f.position,
                rationale: format!("no candidate in memory; exploring frontier {k} ({} cells, {v} visits)", f.size),
            }),
            None => Err(DecisionError::NoCandidates),
        }
    }

    fn assess_status(&self, ctx: &StatusContext<'_>) -> Result<StatusDecision, DecisionError> {
        for (i, sub) in ctx.subtasks.iter().enumerate() {
            if ctx.status.get(i).copied().unwrap_or(true) {
                continue;
            }
            let classes: BTreeSet<String> = sub.satisfying_classes.iter().cloned().collect();
            if let Some(obj) = object_within_success_radius(ctx.scene, ctx.agent, &classes, self.eps) {
                let mut updated = ctx.status.to_vec();
                updated[i] = true;
                return Ok(StatusDecision {
                    completed_subtask: Some(i),
                    reason: format!("{} {} within {:.2} m", obj.class, obj.id, self.eps),
                    updated_status: updated,
                });
            }
        }
        Ok(StatusDecision::unchanged(ctx.status, "no satisfying object in range"))
    }
}
