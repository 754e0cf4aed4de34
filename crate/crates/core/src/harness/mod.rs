//! Closed-loop scenario runs driven by a JSON configuration, with CSV/SVG output.
//! The identification demo on an exact polynomial system lives here too.

mod config;
mod id_demo;
mod output;
mod plot;
mod run;

pub use config::{
    AdaptationConfig, BasisConfig, IntegrationConfig, NoiseConfig, ObstacleConfig, PlantConfig, SafetyConfig,
    ScenarioConfig, SCHEMA_VERSION,
};
pub use id_demo::{exact_generator, run_id_demo, IdDemoCase, IdDemoConfig, IdDemoReport};
pub use output::{emit_csv, emit_summary, read_csv, CsvLog, CSV_HEADER};
pub use plot::{axis_range, emit_plots, PlotScene, PlotSeries};
pub use run::{disturbance_error, run_scenario, LogRow, RunLog, RunSummary, BOUND_SLACK};

impl ScenarioConfig {
    pub fn plot_scene(&self) -> PlotScene {
        PlotScene {
            obstacles: self.safety.obstacles.iter().map(|o| (o.center, o.radius)).collect(),
            reference: Some(self.reference),
            horizon: self.integration.horizon,
        }
    }
}
