//! Criterion benchmarks for the detector, the estimators and the simulator.
