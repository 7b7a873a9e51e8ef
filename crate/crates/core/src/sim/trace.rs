//! CSV export of tick records.

use crate::event::{EventKind, EventRecord};
use crate::money::MICRO_PER_RM;

pub const CSV_HEADER: [&str; 6] = ["t", "state", "power_w", "credit_rm", "relay", "buzzer"];

/// One row per tick record; `credit_rm` keeps micro-RM resolution.
pub fn export_trace_csv(trace: &[EventRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("write to memory");
    for e in trace {
        if let EventKind::Tick { state, power_w, credit_micro, relay, buzzer } = &e.kind {
            let credit = format!("{}.{:06}", credit_micro / MICRO_PER_RM, credit_micro % MICRO_PER_RM);
            w.write_record([
                e.t.to_string(),
                state.to_string(),
                power_w.to_string(),
                credit,
                if *relay { "closed" } else { "open" }.to_string(),
                if *buzzer { "on" } else { "off" }.to_string(),
            ])
            .expect("write to memory");
        }
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{builtin_scenario, run_scenario};

    #[test]
    fn empty_trace_is_header_only() {
        assert_eq!(export_trace_csv(&[]), "t,state,power_w,credit_rm,relay,buzzer\n");
    }

    #[test]
    fn bulb1_rows() {
        let csv = export_trace_csv(&run_scenario(&builtin_scenario("table1-bulb1").unwrap()).unwrap());
        let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
        assert_eq!(rows.len(), 60);
        let at = |t: &str| rows.iter().find(|r| r[0] == t).unwrap().clone();
        assert_eq!(at("30")[2], "57");
        assert_eq!(at("35")[2], "0");
        assert_eq!(at("35")[1], "CutOff");

        let mut prev = f64::INFINITY;
        for r in rows.iter().filter(|r| r[4] == "closed") {
            let c: f64 = r[3].parse().unwrap();
            assert!(c <= prev);
            prev = c;
        }
    }
}
