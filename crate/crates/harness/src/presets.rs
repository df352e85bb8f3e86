//! Built-in experiment configurations.
//!
//! The starting point is drawn uniformly from the feasible set in every
//! preset; the source experiments do not say how it was chosen. The
//! quadratic experiment does not state its iteration count either; 1000 is
//! used. Curvature batches for the auto-conditioned stochastic methods keep
//! their default of one sample.

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const QP_INDEFINITE: &str = "\
# Box-constrained indefinite quadratic program: PG against AC-PG.
# x0 is drawn uniformly from the box (an assumption; not given by the source).
experiment.name = qp-indefinite
experiment.trials = 10
experiment.seed = 0
experiment.x0 = uniform

problem.kind = qp
problem.n = 100
problem.lower = -5
problem.upper = 5

solver.pg.algorithm = pg
solver.pg.k = 1000
solver.pg.gamma = L

solver.acpg.algorithm = acpg
solver.acpg.k = 1000
solver.acpg.theta = 0.1, 0.2, 0.5, 0.001
";

macro_rules! svm_preset {
    ($name:literal, $n:literal, $problem_mode:literal, $anchor:literal, $eval:literal) => {
        concat!(
            "# Semi-supervised smoothed SVM: SPG, AC-SPG, VR-SPG and AC-VR-SPG.\n",
            "# x0 is drawn uniformly from the feasible set (an assumption; not given by the source).\n",
            "experiment.name = ", $name, "\n",
            "experiment.trials = 10\n",
            "experiment.seed = 0\n",
            "experiment.x0 = uniform\n",
            "\n",
            "problem.kind = svm\n",
            "problem.n = ", $n, "\n",
            $problem_mode,
            "problem.lambda1 = 0.5\n",
            "problem.lambda2 = 0.5\n",
            "problem.lambda3 = 1\n",
            "\n",
            "eval.every = 10\n",
            $eval,
            "\n",
            "solver.spg.algorithm = spg\n",
            "solver.spg.k = 1000\n",
            "solver.spg.gamma = 2L\n",
            "solver.spg.batch = 25000\n",
            "\n",
            "solver.acspg.algorithm = acspg\n",
            "solver.acspg.k = 1000\n",
            "solver.acspg.theta = 0.1, 0.2, 0.5, 0.001\n",
            "solver.acspg.gamma_multiplier = 3\n",
            "solver.acspg.batch = 25000\n",
            "\n",
            "solver.vrspg.algorithm = vrspg\n",
            "solver.vrspg.k = 1000\n",
            "solver.vrspg.gamma = 2L\n",
            "solver.vrspg.epoch_len = 10\n",
            "solver.vrspg.anchor_batch = ", $anchor, "\n",
            "solver.vrspg.inner_batch = 5000\n",
            "\n",
            "solver.acvrspg.algorithm = acvrspg\n",
            "solver.acvrspg.k = 1000\n",
            "solver.acvrspg.theta = 0.1, 0.2, 0.5, 0.001\n",
            "solver.acvrspg.gamma_multiplier = 3\n",
            "solver.acvrspg.epoch_len = 10\n",
            "solver.acvrspg.anchor_batch = ", $anchor, "\n",
            "solver.acvrspg.inner_batch = 5000\n",
        )
    };
}

pub const SVM_FINITE_N10: &str = svm_preset!("svm-finite-n10", "10", "problem.mode = finite\nproblem.m = 200000\n", "M", "");
pub const SVM_FINITE_N100: &str = svm_preset!("svm-finite-n100", "100", "problem.mode = finite\nproblem.m = 200000\n", "M", "");
pub const SVM_ONLINE_N10: &str = svm_preset!("svm-online-n10", "10", "problem.mode = online\n", "200000", "eval.samples = 100000\n");
pub const SVM_ONLINE_N100: &str = svm_preset!("svm-online-n100", "100", "problem.mode = online\n", "200000", "eval.samples = 100000\n");

pub const PRESETS: [Preset; 5] = [
    Preset {
        name: "qp-indefinite",
        summary: "indefinite box QP, n=100, PG vs AC-PG from four initial estimates",
        text: QP_INDEFINITE,
    },
    Preset {
        name: "svm-finite-n10",
        summary: "smoothed SVM, n=10, pre-generated data (M=2e5)",
        text: SVM_FINITE_N10,
    },
    Preset {
        name: "svm-finite-n100",
        summary: "smoothed SVM, n=100, pre-generated data (M=2e5)",
        text: SVM_FINITE_N100,
    },
    Preset {
        name: "svm-online-n10",
        summary: "smoothed SVM, n=10, samples generated on demand",
        text: SVM_ONLINE_N10,
    },
    Preset {
        name: "svm-online-n100",
        summary: "smoothed SVM, n=100, samples generated on demand",
        text: SVM_ONLINE_N100,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
