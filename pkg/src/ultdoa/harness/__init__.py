"""Scenario files, end-to-end runs, reports and the HTTP service."""
from .report import CSV_FIELDS, EmptyReportError, emit_report, parse_report_csv, report_csv, report_table
from .runner import ReportRow, RunReport, default_points, load_points, run_end_to_end
from .scenario import (
    ChannelParams,
    GnbConfig,
    ScenarioConfig,
    ScenarioError,
    SolverConfig,
    UeConfig,
    build_world,
    load_scenario,
    parse_scenario,
    scenario_to_dict,
)
from .service import DEFAULT_PORT, DETERMINE_LOCATION_PATH, locate_ue, serve_determine_location
