//! Jarzynski equalities and trajectory-level entropy-production fluctuation
//! theorems evaluated exactly over EPM tables.

mod entropy;
mod jarzynski;

pub use entropy::{
    entropy_table, entropy_table_for, integral_ft_check, EntropyDecompositions, EntropyMode, EntropyRow, IntegralFtReport,
    SupportFlag, TrajectoryEntropyTable, ZERO_PROBABILITY,
};
pub use jarzynski::{
    applicable_reports, jarzynski_lhs, jarzynski_operator_form, jarzynski_report, jarzynski_rhs, JarzynskiForm,
    JarzynskiIngredients, JarzynskiReport, POPULATION_TOL,
};
