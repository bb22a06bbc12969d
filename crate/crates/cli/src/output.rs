//! Result and report emission: triple TSV, run summaries, numeric
//! formatting.

use std::io::{self, Write};

use kgcjoin_core::{EmbeddingMatrix, JoinStats, ResultTriple};

/// Positional formatting with six significant digits.
pub fn fmt_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0.00000".to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (5 - exp).clamp(0, 17) as usize;
    let s = format!("{v:.decimals$}");
    // Rounding can gain a digit (9.999999 -> "10.00000"); drop one decimal.
    if decimals > 0 {
        let rounded: f64 = s.parse().unwrap_or(v);
        if rounded != 0.0 && (rounded.abs().log10().floor() as i32) > exp {
            return format!("{v:.*}", decimals - 1, v = v);
        }
    }
    s
}

/// Writes `head<TAB>rel<TAB>tail<TAB>distance` lines, using labels when the
/// matrices carry them and integer ids otherwise.
pub fn write_triples_tsv(
    w: &mut impl Write,
    triples: &[ResultTriple],
    entities: &EmbeddingMatrix,
    relations: &EmbeddingMatrix,
) -> io::Result<()> {
    let e_labels = entities.labels();
    let r_labels = relations.labels();
    let mut line = String::new();
    for t in triples {
        line.clear();
        match e_labels {
            Some(ls) => line.push_str(&ls[t.head]),
            None => line.push_str(&t.head.to_string()),
        }
        line.push('\t');
        match r_labels {
            Some(ls) => line.push_str(&ls[t.rel]),
            None => line.push_str(&t.rel.to_string()),
        }
        line.push('\t');
        match e_labels {
            Some(ls) => line.push_str(&ls[t.tail]),
            None => line.push_str(&t.tail.to_string()),
        }
        line.push('\t');
        line.push_str(&fmt_sig6(t.distance));
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// One-line run summary for standard error.
pub fn summary_line(stats: &JoinStats) -> String {
    format!(
        "relations={} candidates={} verified={} emitted={} wall_ms={:.1}",
        stats.relations,
        stats.candidate_pairs,
        stats.kernel_cells,
        stats.emitted,
        stats.total.as_secs_f64() * 1e3,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_formatting() {
        assert_eq!(fmt_sig6(0.0), "0.00000");
        assert_eq!(fmt_sig6(2.25), "2.25000");
        assert_eq!(fmt_sig6(123456.7), "123457");
        assert_eq!(fmt_sig6(0.000123456), "0.000123456");
        assert_eq!(fmt_sig6(-1.5), "-1.50000");
        assert_eq!(fmt_sig6(9.999999), "10.0000");
    }

    #[test]
    fn tsv_uses_labels_when_present() {
        let e = EmbeddingMatrix::new(2, 1, vec![0.0, 1.0])
            .unwrap()
            .with_labels(vec!["alpha".into(), "beta".into()])
            .unwrap();
        let r = EmbeddingMatrix::new(1, 1, vec![0.5]).unwrap();
        let triples = vec![ResultTriple { head: 0, rel: 0, tail: 1, distance: 0.25 }];
        let mut buf = Vec::new();
        write_triples_tsv(&mut buf, &triples, &e, &r).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "alpha\t0\tbeta\t0.250000\n");
    }
}
