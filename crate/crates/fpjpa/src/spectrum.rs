//! Sampled spectra versus detuning, and their CSV form.
//!
//! On disk, frequencies are ordinary frequencies in Hz; internally all
//! rates and detunings are angular (rad/s). Complex spectra serialize as
//! `detuning_Hz,re,im`, gain spectra as `detuning_Hz,gain_dB`.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// What a spectrum's values mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    /// Raw complex reflection coefficient S11(δ).
    ComplexS11,
    /// Reference-normalized complex reflection S̃11(δ).
    NormalizedS11,
    /// Net power gain, linear.
    NetGainLinear,
    /// Net power gain in dB.
    NetGainDb,
}

impl SpectrumKind {
    pub fn is_complex(self) -> bool {
        matches!(self, SpectrumKind::ComplexS11 | SpectrumKind::NormalizedS11)
    }
}

/// Spectrum samples.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumData {
    Complex(Vec<Complex64>),
    Gain(Vec<f64>),
}

impl SpectrumData {
    pub fn len(&self) -> usize {
        match self {
            SpectrumData::Complex(v) => v.len(),
            SpectrumData::Gain(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A sampled spectrum over strictly increasing detunings (rad/s).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub detunings: Vec<f64>,
    pub data: SpectrumData,
    pub kind: SpectrumKind,
}

impl Spectrum {
    pub fn new(detunings: Vec<f64>, data: SpectrumData, kind: SpectrumKind) -> Result<Self> {
        if detunings.len() != data.len() {
            return Err(Error::Validation(format!(
                "detunings ({}) and values ({}) differ in length",
                detunings.len(),
                data.len()
            )));
        }
        if detunings.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("detunings must be strictly increasing".into()));
        }
        match (kind.is_complex(), &data) {
            (true, SpectrumData::Complex(_)) | (false, SpectrumData::Gain(_)) => {}
            _ => return Err(Error::Validation("spectrum kind does not match value type".into())),
        }
        Ok(Spectrum { detunings, data, kind })
    }

    pub fn len(&self) -> usize {
        self.detunings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings.is_empty()
    }

    /// Gain samples in linear units; errors for complex kinds.
    pub fn gain_linear(&self) -> Result<Vec<f64>> {
        match (&self.data, self.kind) {
            (SpectrumData::Gain(v), SpectrumKind::NetGainLinear) => Ok(v.clone()),
            (SpectrumData::Gain(v), SpectrumKind::NetGainDb) => {
                Ok(v.iter().map(|db| 10f64.powf(db / 10.0)).collect())
            }
            _ => Err(Error::Domain("complex spectrum has no scalar gain".into())),
        }
    }

    /// Complex samples; errors for gain kinds.
    pub fn complex_values(&self) -> Result<&[Complex64]> {
        match &self.data {
            SpectrumData::Complex(v) => Ok(v),
            SpectrumData::Gain(_) => Err(Error::Domain("gain spectrum holds no complex values".into())),
        }
    }

    /// Writes the CSV form. Complex kinds emit `detuning_Hz,re,im`; gain
    /// kinds emit `detuning_Hz,gain_dB` (linear gain converted to dB).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::Format(e.to_string());
        match &self.data {
            SpectrumData::Complex(values) => {
                w.write_record(["detuning_Hz", "re", "im"]).map_err(err)?;
                for (d, v) in self.detunings.iter().zip(values) {
                    w.write_record(&[
                        format!("{}", d / (2.0 * std::f64::consts::PI)),
                        format!("{}", v.re),
                        format!("{}", v.im),
                    ])
                    .map_err(err)?;
                }
            }
            SpectrumData::Gain(values) => {
                w.write_record(["detuning_Hz", "gain_dB"]).map_err(err)?;
                for (d, v) in self.detunings.iter().zip(values) {
                    let db = match self.kind {
                        SpectrumKind::NetGainLinear => 10.0 * v.log10(),
                        _ => *v,
                    };
                    w.write_record(&[
                        format!("{}", d / (2.0 * std::f64::consts::PI)),
                        format!("{}", db),
                    ])
                    .map_err(err)?;
                }
            }
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }

    /// Reads a spectrum CSV, detecting the kind from the header.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let err = |e: csv::Error| Error::Format(e.to_string());
        let headers = r.headers().map_err(err)?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        let two_pi = 2.0 * std::f64::consts::PI;
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("bad float field: {s:?}")))
        };
        match cols.as_slice() {
            ["detuning_Hz", "re", "im"] => {
                let mut detunings = Vec::new();
                let mut values = Vec::new();
                for rec in r.records() {
                    let rec = rec.map_err(err)?;
                    detunings.push(parse(&rec[0])? * two_pi);
                    values.push(Complex64::new(parse(&rec[1])?, parse(&rec[2])?));
                }
                Spectrum::new(detunings, SpectrumData::Complex(values), SpectrumKind::NormalizedS11)
            }
            ["detuning_Hz", "gain_dB"] => {
                let mut detunings = Vec::new();
                let mut values = Vec::new();
                for rec in r.records() {
                    let rec = rec.map_err(err)?;
                    detunings.push(parse(&rec[0])? * two_pi);
                    values.push(parse(&rec[1])?);
                }
                Spectrum::new(detunings, SpectrumData::Gain(values), SpectrumKind::NetGainDb)
            }
            other => Err(Error::Format(format!("unrecognized spectrum header: {other:?}"))),
        }
    }
}

/// A uniform detuning grid specification (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetuningGrid {
    pub start: f64,
    pub stop: f64,
    pub n: usize,
}

impl DetuningGrid {
    pub fn new(start: f64, stop: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Validation(format!("grid needs n >= 2 points, got {n}")));
        }
        if !(start < stop) {
            return Err(Error::Validation(format!(
                "grid must be increasing: start = {start}, stop = {stop}"
            )));
        }
        Ok(DetuningGrid { start, stop, n })
    }

    /// Grid points, endpoints included.
    pub fn points(&self) -> Vec<f64> {
        let step = (self.stop - self.start) / (self.n - 1) as f64;
        (0..self.n)
            .map(|i| {
                if i + 1 == self.n {
                    self.stop
                } else {
                    self.start + step * i as f64
                }
            })
            .collect()
    }
}
