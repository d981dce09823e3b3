use std::io::{Read, Write};

use super::{PipelineError, ReadoutModel, WindowedDataset};

/// Writes `k,target,x0..x{m-1}`, one row per pair.
pub fn write_dataset_csv<W: Write>(ds: &WindowedDataset, mut out: W) -> Result<(), PipelineError> {
    write!(out, "k,target")?;
    for c in 0..ds.m {
        write!(out, ",x{c}")?;
    }
    writeln!(out)?;
    for j in 0..ds.len() {
        write!(out, "{},{:.16e}", ds.ks[j], ds.targets[j])?;
        for v in ds.window(j) {
            write!(out, ",{v:.16e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_dataset_csv<R: Read>(reader: R, subseries_index: usize) -> Result<WindowedDataset, PipelineError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let m = header.len().saturating_sub(2);
    let expected = (0..m).map(|c| format!("x{c}"));
    if header.len() < 3
        || &header[0] != "k"
        || &header[1] != "target"
        || !header.iter().skip(2).zip(expected).all(|(h, e)| h == e)
    {
        return Err(PipelineError::Parse {
            line: 1,
            message: "expected header k,target,x0,x1,...".into(),
        });
    }
    let mut ks = Vec::new();
    let mut targets = Vec::new();
    let mut windows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        ks.push(record[0].trim().parse::<usize>().map_err(|_| PipelineError::Parse {
            line,
            message: format!("bad window index {:?}", &record[0]),
        })?);
        targets.push(parse_finite(&record[1], line)?);
        windows.push(
            record
                .iter()
                .skip(2)
                .map(|cell| parse_finite(cell, line))
                .collect::<Result<Vec<f64>, _>>()?,
        );
    }
    let mut ds = WindowedDataset::from_windows(&windows, targets, subseries_index)?;
    ds.ks = ks;
    Ok(ds)
}

/// Writes `term,value` rows: `bias`, `ridge_lambda`, then `w0..w{m-1}`.
pub fn write_readout_csv<W: Write>(model: &ReadoutModel, mut out: W) -> Result<(), PipelineError> {
    writeln!(out, "term,value")?;
    writeln!(out, "bias,{:.16e}", model.bias)?;
    writeln!(out, "ridge_lambda,{:.16e}", model.ridge_lambda)?;
    for (i, w) in model.weights.iter().enumerate() {
        writeln!(out, "w{i},{w:.16e}")?;
    }
    Ok(())
}

pub fn read_readout_csv<R: Read>(reader: R) -> Result<ReadoutModel, PipelineError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() != 2 || &header[0] != "term" || &header[1] != "value" {
        return Err(PipelineError::Parse {
            line: 1,
            message: "expected header term,value".into(),
        });
    }
    let mut bias = None;
    let mut lambda = None;
    let mut weights: Vec<Option<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let value = parse_finite(&record[1], line)?;
        let dup = |what: &str| PipelineError::Parse {
            line,
            message: format!("duplicate term {what}"),
        };
        match &record[0] {
            "bias" => {
                if bias.replace(value).is_some() {
                    return Err(dup("bias"));
                }
            }
            "ridge_lambda" => {
                if lambda.replace(value).is_some() {
                    return Err(dup("ridge_lambda"));
                }
            }
            term => {
                let idx = term
                    .strip_prefix('w')
                    .and_then(|s| s.parse::<usize>().ok())
                    .filter(|i| *i < 1 << 24)
                    .ok_or_else(|| PipelineError::Parse {
                        line,
                        message: format!("unknown term {term:?}"),
                    })?;
                if idx >= weights.len() {
                    weights.resize(idx + 1, None);
                }
                if weights[idx].replace(value).is_some() {
                    return Err(dup(term));
                }
            }
        }
    }
    let missing = |what: &str| PipelineError::Parse {
        line: 0,
        message: format!("missing term {what}"),
    };
    let bias = bias.ok_or_else(|| missing("bias"))?;
    let ridge_lambda = lambda.ok_or_else(|| missing("ridge_lambda"))?;
    if !(ridge_lambda >= 0.0) {
        return Err(PipelineError::Parse {
            line: 0,
            message: "ridge_lambda must be >= 0".into(),
        });
    }
    if weights.is_empty() {
        return Err(missing("w0"));
    }
    let weights = weights
        .into_iter()
        .enumerate()
        .map(|(i, w)| w.ok_or_else(|| missing(&format!("w{i}"))))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(ReadoutModel {
        weights,
        bias,
        ridge_lambda,
    })
}

fn parse_finite(cell: &str, line: u64) -> Result<f64, PipelineError> {
    cell.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| PipelineError::Parse {
            line,
            message: format!("cannot parse {cell:?} as a finite number"),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{build_dataset, DatasetLayout};

    #[test]
    fn dataset_round_trip() {
        let layout = DatasetLayout {
            m: 3,
            stride: 1,
            samples_per_symbol: 1,
        };
        let x: Vec<f64> = (0..9).map(|v| (v as f64).sqrt() / 3.0).collect();
        let ds = build_dataset(&x, &x, &layout, 1).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("k,target,x0,x1,x2\n0,"));
        let back = read_dataset_csv(&buf[..], 1).unwrap();
        assert_eq!(back.ks, ds.ks);
        assert_eq!(back.targets, ds.targets);
        assert!(back.windows().eq(ds.windows()));
    }

    #[test]
    fn readout_round_trip() {
        let model = ReadoutModel {
            weights: vec![0.1, -2.5e-7, 3.0],
            bias: std::f64::consts::PI,
            ridge_lambda: 0.0,
        };
        let mut buf = Vec::new();
        write_readout_csv(&model, &mut buf).unwrap();
        assert_eq!(read_readout_csv(&buf[..]).unwrap(), model);
    }

    #[test]
    fn readout_rejects_bad_input() {
        let bad = [
            "term,value\nbias,1\nw0,1\n",
            "term,value\nbias,1\nridge_lambda,0\n",
            "term,value\nbias,1\nridge_lambda,0\nw1,2\n",
            "term,value\nbias,1\nbias,2\nridge_lambda,0\nw0,1\n",
            "term,value\nbias,1\nridge_lambda,-1\nw0,1\n",
            "term,value\nbias,x\nridge_lambda,0\nw0,1\n",
            "term,value\nbeta,1\n",
            "a,b\n",
            "term,value\nbias,1\nridge_lambda,0\nw99999999999,1\n",
        ];
        for text in bad {
            assert!(read_readout_csv(text.as_bytes()).is_err(), "{text:?}");
        }
    }

    #[test]
    fn dataset_rejects_bad_input() {
        let bad = [
            "k,target\n0,1\n",
            "k,target,x1\n0,1,2\n",
            "k,target,x0\n",
            "k,target,x0\n-1,1,2\n",
            "k,target,x0\n0,1,nan\n",
            "k,target,x0\n0,1\n",
        ];
        for text in bad {
            assert!(read_dataset_csv(text.as_bytes(), 1).is_err(), "{text:?}");
        }
    }
}
