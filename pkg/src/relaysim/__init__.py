"""Deterministic 2-D simulator of a directional-antenna relay convoy.

A chain of differential-drive followers tracks a scripted mover by
sweeping a directional antenna, estimating the bearing as an
RSSI-weighted centroid, and relaying traffic back to a static base.
"""

from ._kernels import backend_name
from .antenna_scan_wca import (
    BearingEstimate,
    ScanConfig,
    ScanResult,
    error_step,
    make_scan_result,
    scan_angles,
    tracking_feasible,
    update_center,
    wca_bearing,
    wca_weight,
)
from .convoy_chain import (
    ChainState,
    LinkState,
    RadioConfig,
    RateTable,
    end_to_end_throughput,
    evaluate_links,
    link_rate,
)
from .follower_control import (
    STOP_COMMAND,
    ControlParams,
    Mode,
    WheelCommand,
    background_velocity,
    follower_step,
    stop_decision,
    wheel_velocities,
)
from .metrics_cli import (
    ScenarioConfig,
    build_simulation,
    config_from_dict,
    config_to_dict,
    export_plotdata,
    load_scenario,
    resolve_scenario,
    run_scenario,
    summarize_trace,
    sweep_scenario,
    with_relay_count,
    write_scenario,
)
from .obstacle_avoidance import (
    AvoidanceParams,
    Situation,
    SonarScan,
    apply_penalty,
    classify_situation,
    escape_direction,
    pseudo_rssi,
)
from .radio_propagation import (
    OMNI,
    SPEED_OF_LIGHT,
    AntennaPattern,
    PathLossModel,
    deterministic_rssi,
    doppler_frequency,
    doppler_loss_delta,
    free_space_loss,
    sample_rssi,
    velocity_components,
)
from .sim_engine import (
    NodeSetup,
    Pose,
    RobotState,
    Segment,
    Simulation,
    SonarGeometry,
    Waypoint,
    WorldModel,
    leader_script,
    raycast_sonar,
    rect_segments,
    step_kinematics,
)

__version__ = "0.1.0"
