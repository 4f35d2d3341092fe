//! Scenario configuration, deterministic execution, replay and export.

mod config;
mod events;
mod output;
mod replay;
mod report;
mod run;
mod submodel;

pub use config::{
    load_scenario, FaultConfig, NodeConfig, RecalibrationConfig, ScenarioConfig, ScenarioError, ScenarioSection,
    SensorConfig, SyncSection, ValidationIssue, VirtualSensorConfig,
};
pub use events::{read_events, write_events, Event, EventPayload};
pub use output::{
    load_run_dir, submodel_for, write_labels, write_run, OutputError, RunDirectory, RunManifest, LABEL_CSV_HEADER,
};
pub use replay::{replay_events, Replay};
pub use report::{build_report, render_report, report_from_run, write_report_csv, ReportRow};
pub use run::{run_scenario, Digests, RunError, RunOptions, RunOutput, StreamInfo, StreamKind};
pub use submodel::{
    export_stream_submodel, export_submodel, import_submodel, ElementValue, MeasurementSubmodel, SubmodelElement,
    SubmodelError, SUBMODEL_SCHEMA,
};
