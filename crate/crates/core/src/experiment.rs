//! Seeded training runs: one environment, one learner, one generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{run_episode, AgentError, AgentVariant, Learner};
use crate::mdp::{Environment, Hyperparameters};
use crate::metrics::RunRecord;

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub record: RunRecord,
    pub learner: Learner,
}

/// Trains `variant` for `hyper.episodes` episodes. The run is a pure function
/// of its arguments.
pub fn train(env: &Environment, variant: AgentVariant, hyper: &Hyperparameters, seed: u64) -> Result<TrainingOutcome, AgentError> {
    hyper.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut learner = Learner::new(variant, env, hyper);
    let logs = (0..hyper.episodes)
        .map(|_| run_episode(&mut learner, env, hyper, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrainingOutcome { record: RunRecord::new(variant, seed, *hyper, logs), learner })
}
