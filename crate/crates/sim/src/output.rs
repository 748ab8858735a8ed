//! CSV outputs. Every file has a header row, LF line endings and `.` as the
//! decimal separator; missing values (empty windows) are empty fields.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use qrouting_core::policy::TableRow;
use qrouting_core::{DeliveryRecord, LearningCurve, PolicyKind, StepReport};
use serde::Serialize;

use crate::HarnessError;

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, HarnessError> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

pub(crate) fn write_rows<T: Serialize>(
    path: &Path,
    rows: impl IntoIterator<Item = T>,
) -> Result<(), HarnessError> {
    let mut w = writer(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

#[derive(Serialize)]
struct StepRow {
    step: u64,
    injected: u64,
    delivered: u64,
    in_flight: u64,
    window_avg_delivery_time: Option<f64>,
}

/// Per-step metrics of one run.
pub fn write_step_metrics(path: &Path, reports: &[StepReport]) -> Result<(), HarnessError> {
    write_rows(
        path,
        reports.iter().map(|r| StepRow {
            step: r.step,
            injected: r.injected,
            delivered: r.delivered,
            in_flight: r.in_flight,
            window_avg_delivery_time: r.window_avg,
        }),
    )
}

#[derive(Serialize)]
struct DeliveryRow {
    packet_id: u64,
    src: u32,
    dst: u32,
    created_at: u64,
    delivered_at: u64,
    delivery_time: u64,
    hops: u32,
}

pub fn write_deliveries(path: &Path, records: &[DeliveryRecord]) -> Result<(), HarnessError> {
    write_rows(
        path,
        records.iter().map(|r| DeliveryRow {
            packet_id: r.packet_id,
            src: r.src.0,
            dst: r.dst.0,
            created_at: r.created_at,
            delivered_at: r.delivered_at,
            delivery_time: r.delivery_time,
            hops: r.hops,
        }),
    )
}

#[derive(Serialize)]
struct CurveRow {
    step: u64,
    mean_delivery_time: Option<f64>,
    delivered: u64,
}

pub fn write_curve(path: &Path, curve: &LearningCurve) -> Result<(), HarnessError> {
    write_rows(
        path,
        curve.points.iter().map(|p| CurveRow {
            step: p.step,
            mean_delivery_time: p.mean,
            delivered: p.delivered,
        }),
    )
}

#[derive(Serialize)]
struct ComparisonRow {
    step: u64,
    policy: &'static str,
    mean_delivery_time: Option<f64>,
}

/// Long-format comparison of several aggregated curves.
pub fn write_comparison(
    path: &Path,
    curves: &[(PolicyKind, &LearningCurve)],
) -> Result<(), HarnessError> {
    let rows = curves.iter().flat_map(|(kind, curve)| {
        curve.points.iter().map(move |p| ComparisonRow {
            step: p.step,
            policy: kind.name(),
            mean_delivery_time: p.mean,
        })
    });
    write_rows(path, rows)
}

#[derive(Serialize)]
struct TableCsvRow {
    node: u32,
    neighbor: u32,
    destination: u32,
    q_value: Option<f64>,
    c_value: Option<f64>,
}

pub fn write_tables(path: &Path, rows: &[TableRow]) -> Result<(), HarnessError> {
    write_rows(
        path,
        rows.iter().map(|r| TableCsvRow {
            node: r.node.0,
            neighbor: r.neighbor.0,
            destination: r.destination.0,
            q_value: r.q_value,
            c_value: r.c_value,
        }),
    )
}
