//! Accuracy, macro F1, QWK by phase, and a confusion heatmap.
//!
//! Usage: `cargo run --example evaluation_metrics -- [confusion.svg]`

use mpain::eval::{
    collapse_to_3, confusion_svg, macro_f1, micro_accuracy, normalized_confusion, qwk,
    qwk_by_phase, Condition, MouseSeries, SeriesPoint, ThreeClass, Timepoint,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truths = [0, 0, 1, 1, 1, 2, 2, 2, 2, 0];
    let preds = [0, 1, 1, 1, 2, 2, 2, 1, 2, 0];
    println!("accuracy {:.3}", micro_accuracy(&preds, &truths)?);
    println!("macro F1 {:.3}", macro_f1(&preds, &truths, 3)?);
    println!("QWK      {:.3}", qwk(&preds, &truths, 3)?);

    // one SNI mouse followed over its timeline; the prediction lags one step late
    let sni = Condition::Sni;
    let tl = sni.timeline();
    let points = tl
        .iter()
        .enumerate()
        .map(|(i, &tp)| SeriesPoint {
            timepoint: tp,
            true_ordinal: i,
            pred_ordinal: i.saturating_sub(1),
        })
        .collect();
    let series = [MouseSeries {
        mouse_id: "sni-m0".into(),
        condition: sni,
        points,
    }];
    let table = qwk_by_phase(&series)?;
    for (name, cells) in &table.rows {
        let fmt: Vec<String> = cells
            .iter()
            .map(|c| c.map_or("-".into(), |v| format!("{v:.3}")))
            .collect();
        println!("{name:>8}: {}", fmt.join("  "));
    }

    let names: Vec<String> = ThreeClass::ALL
        .iter()
        .map(|c| c.name().to_string())
        .collect();
    let svg = confusion_svg(
        &normalized_confusion(&preds, &truths, 3)?,
        &names,
        "3-class confusion",
    );
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "confusion.svg".into());
    std::fs::write(&out, svg)?;
    println!("wrote {out}");

    let d0 = mpain::eval::PainLabel::new(None, Timepoint::D0)?;
    println!("D0 baseline collapses to {}", collapse_to_3(d0).name());
    Ok(())
}
