pub mod attack;
pub mod bench;
pub mod overhead;
pub mod replay;
pub mod session;
pub mod simulate;

use zaps_core::snark::Backend;

use crate::error::CliError;

pub(crate) fn to_json(v: &impl serde::Serialize) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serialises");
    s.push('\n');
    s.into_bytes()
}

pub(crate) fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let run = |e: csv::Error| CliError::Run(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(run)?;
    for r in rows {
        w.write_record(&r).map_err(run)?;
    }
    w.into_inner().map_err(|e| CliError::Run(e.to_string()))
}

pub(crate) fn backends(name: &str) -> Result<Vec<Backend>, CliError> {
    match name {
        "both" => Ok(vec![Backend::Schnorr, Backend::Qap]),
        b => b.parse().map(|b| vec![b]).map_err(CliError::Usage),
    }
}
