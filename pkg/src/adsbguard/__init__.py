"""Route-profile anomaly detection for ADS-B message sequences.

Models legitimate flight routes with an LSTM encoder-decoder trained on
benign track windows, scores new windows by reconstruction error, and ships
attack injectors plus a cross-validated evaluation harness and CLI.
"""

from .detector import (
    Alert,
    CalibratedDetector,
    DetectorConfig,
    Verdict,
    aggregate_alerts,
    alarm_delay,
    anomaly_score,
    calibrate_threshold,
    cos_similarity,
    fit_detector,
    fit_route_model,
    score_flight,
)
from .features import (
    FEATURE_NAMES,
    Normalizer,
    Window,
    apply_normalizer,
    extract_features,
    fit_normalizer,
    flight_features,
    make_windows,
)
from .geodesy import (
    WGS84,
    AveragePath,
    Ellipsoid,
    GeodesicResult,
    RouteProfile,
    average_path,
    build_route_profile,
    haversine_m,
    major_points,
    vincenty_inverse,
)
from .harness import (
    EvalConfig,
    FoldPlan,
    compute_metrics,
    export_geojson,
    export_report,
    kfold_evaluate,
    make_fold_plan,
)
from .seq_autoencoder import (
    EncoderDecoderModel,
    LstmParams,
    LstmState,
    TrainConfig,
    decode,
    encode,
    load_model,
    loss_and_gradients,
    lstm_step,
    reconstruct,
    save_model,
    train,
)
from .synth_routes import SynthConfig, generate_benign_flight, generate_dataset
from .threat_injection import (
    AttackKind,
    AttackSpan,
    inject_gradual_drift,
    inject_random_noise,
    inject_route_replacement,
    label_windows,
)
from .track_model import (
    FlightTrack,
    GeoPoint,
    RouteDataset,
    TrackMessage,
    load_dataset,
    parse_flight_csv,
    serialize_flight_csv,
    validate_track,
)

__version__ = "0.1.0"
