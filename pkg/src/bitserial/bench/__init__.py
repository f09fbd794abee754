from .harness import (
    ALL_METHODS,
    BASELINE_METHODS,
    CSV_HEADER,
    BenchRecord,
    MISSING,
    FakeTimer,
    SweepConfig,
    emit_csv,
    emit_ratio_grid,
    expected_record_count,
    median_time,
    prepare,
    read_csv,
    run_sweep,
)
