//! Report and prediction emitters: metrics CSV, per-sample trajectory CSV,
//! and SVG overlays.

use std::io::Write;

use crate::error::Result;
use crate::featuremap::FeatureMap;
use crate::geom::{FrameTransform, ObstaclePolygon, Trajectory, Vec2};

use super::benchmark::BenchmarkReport;

/// Metrics CSV: one row per method x scene x horizon. The success-rate
/// column appears only when the benchmark computed it.
pub fn write_metrics_csv(report: &BenchmarkReport, sink: &mut impl Write) -> Result<()> {
    let with_success = report.rows.iter().any(|r| r.success_rate.is_some());
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["method", "scene", "horizon_s", "ade", "fde", "n"];
    if with_success {
        header.push("success_rate");
    }
    w.write_record(&header)?;
    for row in &report.rows {
        let mut record = vec![
            row.method.name().to_string(),
            row.scene.clone(),
            row.horizon_s.to_string(),
            row.metrics.ade.to_string(),
            row.metrics.fde.to_string(),
            row.metrics.n.to_string(),
        ];
        if with_success {
            record.push(row.success_rate.map(|s| s.to_string()).unwrap_or_default());
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

impl From<csv::Error> for crate::error::Error {
    fn from(e: csv::Error) -> Self {
        crate::error::Error::Data(format!("csv: {e}"))
    }
}

/// Per-sample trajectory CSV: predicted and ground-truth positions per step.
pub fn write_predictions_csv(
    entries: &[(String, &Trajectory, &Trajectory)],
    sink: &mut impl Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["sample_id", "step", "pred_x", "pred_y", "gt_x", "gt_y"])?;
    for (id, pred, gt) in entries {
        for (step, (p, g)) in pred.points().iter().zip(gt.points()).enumerate() {
            w.write_record([
                id.clone(),
                (step + 1).to_string(),
                p.pos.x.to_string(),
                p.pos.y.to_string(),
                g.pos.x.to_string(),
                g.pos.y.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// What an SVG overlay draws, all in the scene frame except the map, which
/// carries its own transform back to the scene.
pub struct SvgOverlay<'a> {
    pub observed: Option<&'a Trajectory>,
    pub ground_truth: Option<&'a Trajectory>,
    pub prediction: &'a Trajectory,
    pub obstacles: &'a [ObstaclePolygon],
    /// Composed map plus the window-to-scene transform, for a heat underlay.
    pub map: Option<(&'a FeatureMap, &'a FrameTransform)>,
}

const SVG_SCALE: f64 = 60.0; // pixels per meter
const SVG_PAD: f64 = 30.0;

/// Render a prediction overlay: ground truth solid, prediction dashed,
/// obstacles filled, optional map heat behind everything.
pub fn write_svg(overlay: &SvgOverlay<'_>, sink: &mut impl Write) -> Result<()> {
    let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut grow = |p: Vec2| {
        min.x = min.x.min(p.x);
        min.y = min.y.min(p.y);
        max.x = max.x.max(p.x);
        max.y = max.y.max(p.y);
    };
    for t in [overlay.observed, overlay.ground_truth, Some(overlay.prediction)]
        .into_iter()
        .flatten()
    {
        for p in t.points() {
            grow(p.pos);
        }
    }
    for o in overlay.obstacles {
        for v in o.vertices() {
            grow(*v);
        }
    }
    if let Some((map, tf)) = overlay.map {
        let geom = map.geom;
        for (i, j) in [(0, 0), (geom.cols, 0), (0, geom.rows), (geom.cols, geom.rows)] {
            grow(tf.apply_inverse(Vec2::new(
                i as f64 * geom.cell_size,
                j as f64 * geom.cell_size,
            )));
        }
    }
    if !min.is_finite() || !max.is_finite() {
        min = Vec2::ZERO;
        max = Vec2::new(1.0, 1.0);
    }

    let to_px = |p: Vec2| -> (f64, f64) {
        (
            (p.x - min.x) * SVG_SCALE + SVG_PAD,
            (max.y - p.y) * SVG_SCALE + SVG_PAD,
        )
    };
    let width = (max.x - min.x) * SVG_SCALE + 2.0 * SVG_PAD;
    let height = (max.y - min.y) * SVG_SCALE + 2.0 * SVG_PAD;

    writeln!(
        sink,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    )?;

    if let Some((map, tf)) = overlay.map {
        let geom = map.geom;
        let (mut w_min, mut w_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..geom.rows {
            for i in 0..geom.cols {
                if map.is_blocked(i, j) || map.dest_cell() == Some((i, j)) {
                    continue;
                }
                let w = map.weight(i, j);
                w_min = w_min.min(w);
                w_max = w_max.max(w);
            }
        }
        for j in 0..geom.rows {
            for i in 0..geom.cols {
                let corners = [
                    Vec2::new(i as f64 * geom.cell_size, j as f64 * geom.cell_size),
                    Vec2::new((i + 1) as f64 * geom.cell_size, j as f64 * geom.cell_size),
                    Vec2::new((i + 1) as f64 * geom.cell_size, (j + 1) as f64 * geom.cell_size),
                    Vec2::new(i as f64 * geom.cell_size, (j + 1) as f64 * geom.cell_size),
                ];
                let pts: Vec<String> = corners
                    .iter()
                    .map(|c| {
                        let (x, y) = to_px(tf.apply_inverse(*c));
                        format!("{x:.1},{y:.1}")
                    })
                    .collect();
                let fill = if map.is_blocked(i, j) {
                    "#555555".to_string()
                } else {
                    let t = if w_max > w_min {
                        ((map.weight(i, j) - w_min) / (w_max - w_min)).clamp(0.0, 1.0)
                    } else {
                        0.5
                    };
                    let r = (220.0 * (1.0 - t)) as u8;
                    let g = (200.0 * t + 30.0) as u8;
                    format!("#{r:02x}{g:02x}40")
                };
                writeln!(
                    sink,
                    r#"<polygon points="{}" fill="{fill}" fill-opacity="0.25" stroke="none"/>"#,
                    pts.join(" ")
                )?;
            }
        }
    }

    for o in overlay.obstacles {
        let pts: Vec<String> = o
            .vertices()
            .iter()
            .map(|v| {
                let (x, y) = to_px(*v);
                format!("{x:.1},{y:.1}")
            })
            .collect();
        writeln!(
            sink,
            r##"<polygon points="{}" fill="#808080" stroke="#404040"/>"##,
            pts.join(" ")
        )?;
    }

    let mut polyline = |t: &Trajectory, style: &str| -> Result<()> {
        let pts: Vec<String> = t
            .points()
            .iter()
            .map(|p| {
                let (x, y) = to_px(p.pos);
                format!("{x:.1},{y:.1}")
            })
            .collect();
        writeln!(
            sink,
            r#"<polyline points="{}" fill="none" {style}/>"#,
            pts.join(" ")
        )?;
        Ok(())
    };
    if let Some(obs) = overlay.observed {
        polyline(obs, r##"stroke="#888888" stroke-width="2""##)?;
    }
    if let Some(gt) = overlay.ground_truth {
        polyline(gt, r##"stroke="#1f77b4" stroke-width="3""##)?;
    }
    polyline(
        overlay.prediction,
        r##"stroke="#d62728" stroke-width="3" stroke-dasharray="8,5""##,
    )?;
    writeln!(sink, "</svg>")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::benchmark::{AverageRow, Method, ReportRow};
    use crate::eval::metrics::Metrics;
    use crate::geom::TrackPoint;

    fn traj(points: &[(f64, f64)]) -> Trajectory {
        let pts = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| TrackPoint::new(i, x, y))
            .collect();
        Trajectory::new(pts, 0.4).unwrap()
    }

    fn fake_report(success: bool) -> BenchmarkReport {
        let methods = [Method::Full, Method::Linear];
        let scenes = ["eth", "hotel"];
        let horizons = [3.2, 4.8];
        let mut rows = Vec::new();
        for m in methods {
            for s in scenes {
                for h in horizons {
                    rows.push(ReportRow {
                        method: m,
                        scene: s.to_string(),
                        horizon_s: h,
                        metrics: Metrics { ade: 0.5, fde: 1.0, n: 10 },
                        success_rate: success.then_some(0.75),
                    });
                }
            }
        }
        BenchmarkReport {
            rows,
            averages: vec![AverageRow {
                method: Method::Full,
                horizon_s: 3.2,
                metrics: Metrics { ade: 0.5, fde: 1.0, n: 20 },
            }],
            index_stats: Vec::new(),
            skipped_scenes: Vec::new(),
        }
    }

    #[test]
    fn metrics_csv_row_count_is_methods_by_scenes_by_horizons() {
        let mut buf = Vec::new();
        write_metrics_csv(&fake_report(false), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 2 * 2 * 2);
        assert_eq!(lines[0], "method,scene,horizon_s,ade,fde,n");
    }

    #[test]
    fn metrics_csv_roundtrips_through_csv_reader() {
        let mut buf = Vec::new();
        write_metrics_csv(&fake_report(true), &mut buf).unwrap();
        let mut reader = csv::Reader::from_reader(buf.as_slice());
        let headers = reader.headers().unwrap().clone();
        assert_eq!(headers.len(), 7);
        let mut count = 0;
        for record in reader.records() {
            let record = record.unwrap();
            assert_eq!(record.len(), 7);
            record[3].parse::<f64>().unwrap();
            count += 1;
        }
        assert_eq!(count, 8);
    }

    #[test]
    fn predictions_csv_has_one_row_per_step() {
        let pred = traj(&[(0.0, 0.0), (1.0, 0.0)]);
        let gt = traj(&[(0.0, 0.1), (1.0, 0.1)]);
        let mut buf = Vec::new();
        write_predictions_csv(&[("s1".to_string(), &pred, &gt)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn svg_contains_basic_shapes() {
        let pred = traj(&[(0.0, 0.0), (1.0, 0.5), (2.0, 0.5)]);
        let gt = traj(&[(0.0, 0.0), (1.0, 0.4), (2.0, 0.6)]);
        let obstacle = ObstaclePolygon::new(vec![
            Vec2::new(3.0, 0.0),
            Vec2::new(4.0, 0.0),
            Vec2::new(4.0, 1.0),
        ])
        .unwrap();
        let obstacles = [obstacle];
        let overlay = SvgOverlay {
            observed: None,
            ground_truth: Some(&gt),
            prediction: &pred,
            obstacles: &obstacles,
            map: None,
        };
        let mut buf = Vec::new();
        write_svg(&overlay, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
        assert!(text.contains("<polyline"));
        assert!(text.contains("<polygon"));
        assert!(text.contains("stroke-dasharray"));
        assert!(text.trim_end().ends_with("</svg>"));
    }
}
