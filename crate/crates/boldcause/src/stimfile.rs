//! Stimulus files: one `0`/`1` per line, with an optional `# tr=<seconds>`
//! header. Other `#` lines and blank lines are ignored.

use std::fs;
use std::path::Path;

use boldcause_core::StimulusTrain;

use crate::error::{CliError, CliResult};

pub fn encode(stim: &StimulusTrain) -> String {
    let mut out = format!("# tr={}\n", stim.tr_seconds());
    for &s in stim.samples() {
        out.push(if s == 1 { '1' } else { '0' });
        out.push('\n');
    }
    out
}

/// Parses a stimulus file. `volume_tr` supplies the TR when the header is
/// absent and must agree with it when present.
pub fn decode(text: &str, volume_tr: Option<f64>) -> CliResult<StimulusTrain> {
    let mut header_tr = None;
    let mut samples = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("tr=") {
                let tr: f64 = v.trim().parse().map_err(|_| {
                    CliError::Format(format!("line {}: bad tr value '{v}'", lineno + 1))
                })?;
                header_tr = Some(tr);
            }
            continue;
        }
        match line {
            "" => {}
            "0" => samples.push(0),
            "1" => samples.push(1),
            other => {
                return Err(CliError::Format(format!(
                    "line {}: expected 0 or 1, found '{other}'",
                    lineno + 1
                )))
            }
        }
    }
    if samples.is_empty() {
        return Err(CliError::Format("stimulus file has no samples".into()));
    }
    let tr = match (header_tr, volume_tr) {
        (Some(h), Some(v)) if h != v => {
            return Err(CliError::Parameter(format!(
                "stimulus TR {h} differs from volume TR {v}"
            )))
        }
        (Some(t), _) | (None, Some(t)) => t,
        (None, None) => {
            return Err(CliError::Parameter(
                "stimulus file has no '# tr=' header and no TR was supplied".into(),
            ))
        }
    };
    Ok(StimulusTrain::new(samples, tr)?)
}

pub fn read(path: &Path, volume_tr: Option<f64>) -> CliResult<StimulusTrain> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    decode(&text, volume_tr)
}

pub fn write(path: &Path, stim: &StimulusTrain) -> CliResult<()> {
    fs::write(path, encode(stim)).map_err(CliError::io(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let stim = StimulusTrain::new(vec![0, 0, 1, 1, 0], 2.0).unwrap();
        let text = encode(&stim);
        assert_eq!(text, "# tr=2\n0\n0\n1\n1\n0\n");
        assert_eq!(decode(&text, None).unwrap(), stim);
    }

    #[test]
    fn tr_from_volume_when_header_missing() {
        let stim = decode("0\n\n1\r\n# note\n0\n", Some(1.5)).unwrap();
        assert_eq!(stim.samples(), &[0, 1, 0]);
        assert_eq!(stim.tr_seconds(), 1.5);
        assert!(matches!(
            decode("0\n1\n", None),
            Err(CliError::Parameter(_))
        ));
    }

    #[test]
    fn tr_conflict_is_a_parameter_error() {
        assert!(matches!(
            decode("# tr=2\n1\n", Some(3.0)),
            Err(CliError::Parameter(_))
        ));
    }

    #[test]
    fn bad_lines_are_format_errors() {
        for text in ["0\n2\n", "0\nyes\n", "# tr=fast\n1\n", "", "# tr=2\n"] {
            assert!(
                matches!(decode(text, Some(2.0)), Err(CliError::Format(_))),
                "{text:?}"
            );
        }
    }
}
