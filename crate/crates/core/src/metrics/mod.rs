//! Evaluation: Dice overlap, protocol-aligned surface distance, separation
//! line accuracy and straightness, and paired significance testing.

mod lines;
mod overlap;
mod report;
mod stats;
mod surface;

pub use lines::{
    compare_lines, extract_separation_line, line_metrics, scan_direction, LineMetrics, LinePositions, ScanDirection,
};
pub use overlap::dice;
pub use report::{
    default_line_specs, evaluate_line, evaluate_pair, BoundaryEntry, DiceEntry, LandmarkErrorEntry, LineEntry,
    LineSpec, MetricRecord, MetricReport,
};
pub use stats::{
    benjamini_hochberg, midranks, wilcoxon_differences, wilcoxon_fdr, wilcoxon_signed_rank, Alternative, ColumnTest,
    PairedColumn, PairedSampleTable, WilcoxonResult, EXACT_MAX_N, MIN_PAIRS,
};
pub use surface::{
    default_boundary_specs, extract_protocol_surface, mean_nearest_distance, pasd, predicted_side_set, BoundarySpec,
    SideSet, SurfaceKind,
};
