//! Production planning on synthetic demand: a lag-window predictor feeds a
//! chance-constrained production optimizer with robust material limits,
//! compared against mean-variance and two-stage baselines.

mod demand;
mod experiment;
mod instance;
mod methods;
mod predictor;
mod qp;

pub use demand::{gen_demand, gen_demand_with, DemandConfig, LOW_DEMAND, N_PRODUCTS};
pub use experiment::{aggregate, run_prodplan, run_prodplan_seed, ProdplanConfig, ProdplanSeedResult, SweepPoint};
pub use instance::{PlanningInstance, LAG_WINDOW};
pub use methods::{mean_var_plan, plan_production, twostage_plan, ProductionDecision};
pub use predictor::{
    denorm_estimate, net_input,
    internal_test_windows, train_framework_predictor, train_twostage_predictor,
    FrameworkPredictor, PredictorConfig, ProductTestSet,
};
pub use qp::{plan_quantities, revenue_of, QpSolution, MAX_QUANTITY};
