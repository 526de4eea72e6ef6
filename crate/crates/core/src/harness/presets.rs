//! Built-in experiments, stored as config text so they document the schema.

use crate::error::{Error, Result};

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    /// `(subdirectory, config)` pairs; a single config uses no subdirectory.
    pub configs: fn() -> Vec<(Option<String>, String)>,
}

const TOY_SGD: &str = "\
name = toy-sgd
problem.family = toy
rounds = 10
optimizer.1.method = sgd
optimizer.1.eta = 0.1
";

const HETEROGENEITY_FLOOR: &str = "\
name = heterogeneity-floor
problem.family = synthetic
problem.clients = 4
problem.dim = 10
problem.condition = 10
problem.zeta = 0.5
problem.seed = 1
init.gap = 1
init.seed = 2
rounds = 200
optimizer.1.method = fedavg
optimizer.1.clients = 2
optimizer.1.local_steps = 100
optimizer.2.method = fedavg
optimizer.2.clients = 4
optimizer.2.local_steps = 100
";

const ACCELERATION: &str = "\
name = acceleration
problem.family = synthetic
problem.clients = 2
problem.dim = 50
problem.condition = 400
problem.zeta = 0
problem.seed = 3
init.gap = 1
init.seed = 4
rounds = 300
optimizer.1.method = sgd
optimizer.2.method = asg
";

const FEDCHAIN_STRONG: &str = "\
name = fedchain-strong
problem.family = synthetic
problem.clients = 4
problem.dim = 10
problem.condition = 100
problem.zeta = 0.1
problem.spread = 0.5
problem.seed = 5
init.gap = 1
init.seed = 6
rounds = 60
optimizer.1.method = fedavg
optimizer.1.local_steps = 2500
optimizer.2.method = sgd
optimizer.3.method = asg
optimizer.4.method = fedchain
optimizer.4.local.method = fedavg
optimizer.4.local.local_steps = 2500
optimizer.4.global.method = sgd
optimizer.5.method = fedchain
optimizer.5.local.method = fedavg
optimizer.5.local.local_steps = 2500
optimizer.5.global.method = asg
";

const SAGA_FLOOR: &str = "\
name = saga-floor
problem.family = synthetic
problem.clients = 4
problem.dim = 10
problem.condition = 10
problem.zeta = 1
problem.seed = 7
init.gap = 1
init.seed = 8
rounds = 400
optimizer.1.method = saga
optimizer.1.clients = 2
optimizer.2.method = ssnm
optimizer.2.clients = 2
optimizer.3.method = sgd
optimizer.3.clients = 2
";

/// Homogeneity levels of the stochastic logistic comparison.
pub const LOGISTIC_LEVELS: [u32; 3] = [0, 50, 100];

fn logistic_config(level: u32) -> String {
    format!(
        "\
name = paper-stochastic-logistic-{level}
problem.family = shuffle
problem.clients = 5
problem.homogeneity = {level}
problem.samples_per_class = 50
problem.seed = 9
oracle.sigma = 0.5
repeat = 3
rounds = 100
optimizer.1.method = fedavg
optimizer.1.local_steps = 25
optimizer.2.method = sgd
optimizer.2.local_steps = 25
optimizer.3.method = asg
optimizer.3.local_steps = 25
optimizer.4.method = fedchain
optimizer.4.local.method = fedavg
optimizer.4.local.local_steps = 25
optimizer.4.global.method = sgd
optimizer.4.global.local_steps = 25
optimizer.5.method = fedchain
optimizer.5.local.method = fedavg
optimizer.5.local.local_steps = 25
optimizer.5.global.method = asg
optimizer.5.global.local_steps = 25
optimizer.6.method = fedchain
optimizer.6.local.method = fedavg
optimizer.6.local.local_steps = 25
optimizer.6.global.method = saga
optimizer.6.global.local_steps = 25
"
    )
}

fn single(text: &'static str) -> Vec<(Option<String>, String)> {
    vec![(None, text.to_string())]
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "toy-sgd",
        description: "two-client scalar toy, SGD for 10 rounds",
        configs: || single(TOY_SGD),
    },
    Preset {
        name: "heterogeneity-floor",
        description: "FedAvg on a shared-Hessian federation, partial and full participation",
        configs: || single(HETEROGENEITY_FLOOR),
    },
    Preset {
        name: "acceleration",
        description: "SGD against multistage AC-SA on a kappa = 400 quadratic",
        configs: || single(ACCELERATION),
    },
    Preset {
        name: "fedchain-strong",
        description: "FedAvg, SGD, ASG and their chains at low heterogeneity",
        configs: || single(FEDCHAIN_STRONG),
    },
    Preset {
        name: "saga-floor",
        description: "SAGA and SSNM against partial-participation SGD",
        configs: || single(SAGA_FLOOR),
    },
    Preset {
        name: "paper-stochastic-logistic",
        description: "5-client logistic regression at 0/50/100% homogeneity, K = 25, R = 100",
        configs: || {
            LOGISTIC_LEVELS
                .iter()
                .map(|&l| (Some(format!("homogeneity-{l}")), logistic_config(l)))
                .collect()
        },
    },
];

pub fn find_preset(name: &str) -> Result<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        Error::Config(format!("unknown preset `{name}` (available: {})", names.join(", ")))
    })
}
