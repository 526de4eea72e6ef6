use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::federation::Env;
use crate::federation::{Comm, FederatedProblem, QueryEvent, QueryLog};
use crate::objectives::HardInstance;
use crate::optimizers::{measure, RunOutput};
use crate::trace::{Phase, Trace};
use crate::vector::Vector;

/// Absolute threshold below which a coordinate counts as zero.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Round whose iterate (or query) left the envelope.
    pub round: usize,
    /// The querying client, `None` for a server iterate.
    pub client: Option<usize>,
    /// Coordinates outside the envelope.
    pub coords: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SupportAudit {
    /// Support of the server iterate after each round.
    pub supports: Vec<(usize, Vec<usize>)>,
    /// Coordinates the server may know after each round.
    pub envelopes: Vec<(usize, Vec<usize>)>,
    pub violations: Vec<Violation>,
}

impl SupportAudit {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    /// Largest coordinate index (0-based) in any recorded iterate support.
    pub fn max_coordinate(&self) -> Option<usize> {
        self.supports.iter().filter_map(|(_, s)| s.last().copied()).max()
    }
}

fn outside(set: &BTreeSet<usize>, x: &Vector) -> Vec<usize> {
    x.support(SUPPORT_THRESHOLD)
        .into_iter()
        .filter(|j| !set.contains(j))
        .collect()
}

/// Replays the information flow of a logged run and checks that every query
/// point and server iterate stays inside the span of coordinates revealed by
/// earlier gradients.
///
/// Within one communication slot a client knows what the server knew at the
/// slot's start plus the supports of its own gradients so far; after the slot
/// the server learns the union. The server iterate after round `r` must lie
/// in what is known once every slot of round `r − 1` (0-based) is done.
pub fn audit_zero_respecting(log: &QueryLog, instance: &HardInstance) -> Result<SupportAudit> {
    let (_, x_init) = log
        .iterates
        .first()
        .ok_or_else(|| Error::Missing("the log has no initial iterate".into()))?;
    if log.iterates.len() > 1 && log.events.is_empty() {
        return Err(Error::Missing(
            "the log has iterates but no per-query data; run with logging enabled".into(),
        ));
    }
    for (_, x) in &log.iterates {
        if x.dim() != instance.dim {
            return Err(Error::DimensionMismatch {
                expected: instance.dim,
                found: x.dim(),
            });
        }
    }

    let mut slots: BTreeMap<usize, Vec<&QueryEvent>> = BTreeMap::new();
    for e in &log.events {
        slots.entry(e.comm.key()).or_default().push(e);
    }

    let mut known: BTreeSet<usize> = x_init.support(SUPPORT_THRESHOLD).into_iter().collect();
    let mut audit = SupportAudit::default();
    let mut slot_iter = slots.into_iter().peekable();
    for (round, x) in log.iterates.iter().skip(1) {
        // Apply every slot that precedes this iterate.
        while let Some((key, _)) = slot_iter.peek() {
            if *key >= Comm::WarmStart(*round).key() {
                break;
            }
            let (key, events) = slot_iter.next().expect("peeked");
            let mut per_client: BTreeMap<usize, Vec<&QueryEvent>> = BTreeMap::new();
            for e in events {
                per_client.entry(e.client).or_default().push(e);
            }
            let mut learned = known.clone();
            for (client, mut events) in per_client {
                events.sort_by_key(|e| e.step);
                let mut local = known.clone();
                for e in events {
                    let bad = outside(&local, &e.point);
                    if !bad.is_empty() {
                        audit.violations.push(Violation {
                            round: key / 3 + 1,
                            client: Some(client),
                            coords: bad,
                        });
                    }
                    local.extend(e.grad.support(SUPPORT_THRESHOLD));
                }
                learned.extend(local);
            }
            known = learned;
        }
        let bad = outside(&known, x);
        if !bad.is_empty() {
            audit.violations.push(Violation {
                round: *round,
                client: None,
                coords: bad,
            });
        }
        audit.supports.push((*round, x.support(SUPPORT_THRESHOLD)));
        audit.envelopes.push((*round, known.iter().copied().collect()));
    }
    Ok(audit)
}

/// Smallest `c` with `‖x − x*‖² ≤ (c/2)[‖x_init − x*‖² + Σ_i ‖x_init − x_i*‖²]`
/// over every query point and server iterate in the log.
pub fn audit_distance_conserving(log: &QueryLog, problem: &FederatedProblem) -> Result<f64> {
    let xs = problem
        .x_star()
        .ok_or_else(|| Error::Missing("distance audit needs the global optimum".into()))?;
    let (_, x_init) = log
        .iterates
        .first()
        .ok_or_else(|| Error::Missing("the log has no initial iterate".into()))?;
    let mut scale = x_init.dist_sq(xs);
    for (i, opt) in problem.client_optima().into_iter().enumerate() {
        let opt = opt.ok_or_else(|| Error::Missing(format!("client {i} has no known optimum")))?;
        scale += x_init.dist_sq(&opt);
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    let worst = log
        .iterates
        .iter()
        .map(|(_, x)| x)
        .chain(log.events.iter().map(|e| &e.point))
        .map(|x| x.dist_sq(xs))
        .fold(0.0, f64::max);
    Ok(2.0 * worst / scale)
}

/// A deliberately non-zero-respecting "method": one round of exact gradient
/// queries at `x0`, then a jump to the closed-form optimum.
pub fn wild_guess_baseline(env: &mut Env, x0: &Vector) -> Result<RunOutput> {
    let xs = env
        .problem
        .x_star()
        .cloned()
        .ok_or_else(|| Error::Missing("the wild guess needs a known optimum".into()))?;
    let mut trace = Trace::default();
    trace.records.push(measure(env, x0, 0, Phase::Init));
    env.record_iterate(0, x0);
    let events: Vec<QueryEvent> = (0..env.problem.n_clients())
        .map(|i| QueryEvent {
            comm: Comm::Main(0),
            client: i,
            step: 0,
            point: x0.clone(),
            grad: env.problem.client(i).grad(x0),
        })
        .collect();
    env.counters.grad += events.len() as u64;
    env.record(events);
    env.record_iterate(1, &xs);
    trace.records.push(measure(env, &xs, 1, Phase::Single));
    Ok(RunOutput { x: xs, trace })
}
