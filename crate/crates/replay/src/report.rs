//! Per-stage throughput and latency accounting for pipeline runs.

use serde::{Deserialize, Serialize};

/// Latency statistics in milliseconds.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p90_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

impl LatencyStats {
    pub fn from_samples(samples: &mut Vec<f64>) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let pct = |q: f64| {
            let idx = ((samples.len() - 1) as f64 * q).round() as usize;
            samples[idx]
        };
        Self {
            mean_ms: samples.iter().sum::<f64>() / samples.len() as f64,
            p50_ms: pct(0.50),
            p90_ms: pct(0.90),
            p99_ms: pct(0.99),
            max_ms: *samples.last().unwrap(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub processed: u64,
    pub dropped: u64,
    pub throughput_hz: f64,
    pub latency: LatencyStats,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: String,
    pub wall_time_s: f64,
    pub stages: Vec<StageReport>,
    pub map_voxels: u64,
    pub warnings: u64,
}

impl RunReport {
    pub fn total_drops(&self) -> u64 {
        self.stages.iter().map(|s| s.dropped).sum()
    }

    pub fn stage(&self, name: &str) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "mode: {}   wall: {:.3} s   map voxels: {}   warnings: {}\n",
            self.mode, self.wall_time_s, self.map_voxels, self.warnings
        ));
        out.push_str(&format!(
            "{:<14} {:>9} {:>8} {:>10} {:>9} {:>9} {:>9} {:>9}\n",
            "stage", "processed", "dropped", "rate (Hz)", "mean ms", "p50 ms", "p90 ms", "p99 ms"
        ));
        for s in &self.stages {
            out.push_str(&format!(
                "{:<14} {:>9} {:>8} {:>10.2} {:>9.3} {:>9.3} {:>9.3} {:>9.3}\n",
                s.name,
                s.processed,
                s.dropped,
                s.throughput_hz,
                s.latency.mean_ms,
                s.latency.p50_ms,
                s.latency.p90_ms,
                s.latency.p99_ms
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles_are_ordered() {
        let mut samples: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        let stats = LatencyStats::from_samples(&mut samples);
        assert!(stats.p50_ms <= stats.p90_ms);
        assert!(stats.p90_ms <= stats.p99_ms);
        assert!(stats.p99_ms <= stats.max_ms);
        assert_eq!(stats.max_ms, 100.0);
        assert!((stats.mean_ms - 50.5).abs() < 1e-12);
    }

    #[test]
    fn empty_samples_default() {
        let stats = LatencyStats::from_samples(&mut Vec::new());
        assert_eq!(stats.max_ms, 0.0);
    }

    #[test]
    fn report_renders() {
        let report = RunReport {
            mode: "offline".into(),
            wall_time_s: 1.25,
            stages: vec![StageReport {
                name: "cloud_fusion".into(),
                processed: 10,
                dropped: 2,
                throughput_hz: 8.0,
                latency: LatencyStats::default(),
            }],
            map_voxels: 42,
            warnings: 0,
        };
        let text = report.to_text();
        assert!(text.contains("cloud_fusion"));
        assert!(text.contains("42"));
        assert_eq!(report.total_drops(), 2);
    }
}
