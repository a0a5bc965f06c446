//! Converter from the public half-hourly solar-home dataset layout.
//!
//! Input: an optional title line, then a header containing `Customer`,
//! `Consumption Category` and `date`, followed by 48 half-hour energy columns
//! in kWh. Categories: `GC` general consumption, `CL` controlled load, `GG`
//! gross generation. Other columns are ignored.
//!
//! Mapping onto a 24-row profile per customer-day:
//! `d_kw = GC + CL` and `r_kw = GG`, each hour taking the mean power of its two
//! half hours (kWh in the two slots summed over one hour). Missing `CL` or `GG`
//! rows count as zero; a day without `GC` is an error. The dataset carries no
//! prices or temperatures, so the synthetic time-of-use tariff and outdoor
//! temperature are filled in.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::InputError;
use crate::profiles::{write_profiles, ProfileRow, ProfileTable};
use crate::synth::{hour_of, outdoor_temperature, tou_price, FEED_IN};

pub const HALF_HOURS: usize = 48;

#[derive(Debug, Default, Clone)]
struct Day {
    gc: Option<Vec<f64>>,
    cl: Option<Vec<f64>>,
    gg: Option<Vec<f64>>,
}

const MONTHS: [&str; 12] = [
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
];

/// Accepts `d/m/yyyy`, `yyyy-mm-dd` and `d-Mon-yy`; returns ISO `yyyy-mm-dd`.
pub fn iso_date(raw: &str) -> Option<String> {
    let raw = raw.trim();
    let parts: Vec<&str> = raw.split(['/', '-']).collect();
    if parts.len() != 3 {
        return None;
    }
    let num = |s: &str| s.parse::<u32>().ok();
    let (y, m, d) = if raw.contains('/') {
        (num(parts[2])?, num(parts[1])?, num(parts[0])?)
    } else if parts[0].len() == 4 {
        (num(parts[0])?, num(parts[1])?, num(parts[2])?)
    } else {
        let m = MONTHS
            .iter()
            .position(|name| parts[1].to_ascii_lowercase().starts_with(name))? as u32
            + 1;
        let y = num(parts[2])?;
        (if y < 100 { 2000 + y } else { y }, m, num(parts[0])?)
    };
    if !(1..=12).contains(&m) || !(1..=31).contains(&d) {
        return None;
    }
    Some(format!("{y:04}-{m:02}-{d:02}"))
}

/// Parses the dataset text into one profile table per customer-day, sorted by id.
pub fn parse_ausgrid(text: &str, path: &Path) -> Result<Vec<ProfileTable>, InputError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut header: Option<(usize, usize, usize)> = None;
    let mut days: BTreeMap<(String, String), Day> = BTreeMap::new();

    for rec in reader.records() {
        let rec = rec.map_err(|e| InputError::csv(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row_err = |message: String| InputError::Row {
            path: path.to_path_buf(),
            line,
            message,
        };
        let Some((cust, cat, date)) = header else {
            let find = |name: &str| rec.iter().position(|f| f.eq_ignore_ascii_case(name));
            if let (Some(c), Some(k), Some(d)) = (find("Customer"), find("Consumption Category"), find("date")) {
                header = Some((c, k, d));
            }
            continue;
        };
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let field = |i: usize| rec.get(i).unwrap_or("");
        let customer = field(cust).to_string();
        if customer.is_empty() {
            return Err(row_err("empty Customer".into()));
        }
        let iso = iso_date(field(date)).ok_or_else(|| row_err(format!("unrecognized date \"{}\"", field(date))))?;
        let values = (0..HALF_HOURS)
            .map(|i| {
                let cell = field(date + 1 + i);
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| row_err(format!("half-hour column {} is not a number: \"{cell}\"", i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let day = days.entry((customer, iso)).or_default();
        let slot = match field(cat).to_ascii_uppercase().as_str() {
            "GC" => &mut day.gc,
            "CL" => &mut day.cl,
            "GG" => &mut day.gg,
            other => return Err(row_err(format!("unknown consumption category \"{other}\""))),
        };
        *slot = Some(values);
    }
    if header.is_none() {
        return Err(InputError::MissingColumn {
            path: path.to_path_buf(),
            column: "Customer".into(),
        });
    }

    days.into_iter()
        .map(|((customer, iso), day)| {
            let house_id = format!("cust{customer:0>3}_{iso}");
            let gc = day.gc.ok_or_else(|| InputError::Other(format!("{}: {house_id} has no GC row", path.display())))?;
            let zeros = vec![0.0; HALF_HOURS];
            let cl = day.cl.unwrap_or_else(|| zeros.clone());
            let gg = day.gg.unwrap_or(zeros);
            let hourly = |v: &[f64], h: usize| v[2 * h] + v[2 * h + 1];
            let rows = (0..24)
                .map(|k| {
                    let hour = hour_of(k, 24);
                    ProfileRow {
                        k,
                        d_kw: hourly(&gc, k) + hourly(&cl, k),
                        r_kw: hourly(&gg, k),
                        p_buy: tou_price(hour),
                        p_sell: FEED_IN,
                        theta_ex_c: outdoor_temperature(hour),
                    }
                })
                .collect();
            Ok(ProfileTable { house_id, rows })
        })
        .collect()
}

/// Reads `input` and writes `<out>/<house_id>.csv` per customer-day. Returns the written paths.
pub fn convert_ausgrid(input: &Path, out: &Path) -> Result<Vec<PathBuf>, InputError> {
    let text = std::fs::read_to_string(input).map_err(|e| InputError::io(input, e))?;
    let tables = parse_ausgrid(&text, input)?;
    std::fs::create_dir_all(out).map_err(|e| InputError::io(out, e))?;
    tables
        .iter()
        .map(|t| {
            let path = out.join(format!("{}.csv", t.house_id));
            write_profiles(&path, t)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(customer: u32, cat: &str, date: &str, v: f64) -> String {
        let vals: Vec<String> = (0..HALF_HOURS).map(|_| v.to_string()).collect();
        format!("{customer},3.78,2076,{cat},{date},{}", vals.join(","))
    }

    fn sample() -> String {
        let mut times: Vec<String> = (1..=HALF_HOURS)
            .map(|i| format!("{}:{:02}", (i / 2) % 24, (i % 2) * 30))
            .collect();
        times.push("Row Quality".into());
        [
            "Solar home half-hour data - 1 July 2012 to 30 June 2013".to_string(),
            format!("Customer,Generator Capacity,Postcode,Consumption Category,date,{}", times.join(",")),
            line(1, "GC", "1/07/2012", 0.25),
            line(1, "CL", "1/07/2012", 0.5),
            line(1, "GG", "1/07/2012", 0.1),
            line(2, "GC", "1/07/2012", 0.3),
        ]
        .join("\n")
    }

    #[test]
    fn dates() {
        assert_eq!(iso_date("1/07/2012").as_deref(), Some("2012-07-01"));
        assert_eq!(iso_date("2012-07-01").as_deref(), Some("2012-07-01"));
        assert_eq!(iso_date("01-Jul-12").as_deref(), Some("2012-07-01"));
        assert_eq!(iso_date("13/13/2012"), None);
        assert_eq!(iso_date("yesterday"), None);
    }

    #[test]
    fn mapping() {
        let t = parse_ausgrid(&sample(), Path::new("a.csv")).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].house_id, "cust001_2012-07-01");
        assert_eq!(t[0].rows.len(), 24);
        assert!((t[0].rows[5].d_kw - 1.5).abs() < 1e-12);
        assert!((t[0].rows[5].r_kw - 0.2).abs() < 1e-12);
        assert!((t[1].rows[0].d_kw - 0.6).abs() < 1e-12);
        assert_eq!(t[1].rows[0].r_kw, 0.0);
        assert!(t[0].rows.iter().all(|r| r.p_buy >= r.p_sell && r.p_sell > 0.0));
    }

    #[test]
    fn bad_cell_names_line() {
        let text = sample().replacen("0.25", "x", 1);
        let err = parse_ausgrid(&text, Path::new("a.csv")).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn missing_header() {
        let err = parse_ausgrid("a,b\n1,2\n", Path::new("a.csv")).unwrap_err().to_string();
        assert!(err.contains("Customer"), "{err}");
    }
}
