use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// One captured array output, widened to `f64` for transport.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericCapture {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    #[serde(serialize_with = "ser_values", deserialize_with = "de_values")]
    pub values: Vec<f64>,
    /// Integers beyond 2^53 lost precision when widened.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub lossy: bool,
}

impl NumericCapture {
    pub fn new(name: &str, shape: Vec<usize>, dtype: &str, values: Vec<f64>) -> Self {
        NumericCapture {
            name: name.to_string(),
            shape,
            dtype: dtype.to_string(),
            values,
            lossy: false,
        }
    }

    pub fn element_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn check(&self) -> Result<(), String> {
        if self.values.len() != self.element_count() {
            return Err(format!(
                "output {}: {} values for shape {:?}",
                self.name,
                self.values.len(),
                self.shape
            ));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Wire {
    Num(f64),
    Tok(String),
}

fn ser_values<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let wire: Vec<Wire> = values
        .iter()
        .map(|&v| {
            if v.is_nan() {
                Wire::Tok("NaN".into())
            } else if v == f64::INFINITY {
                Wire::Tok("Inf".into())
            } else if v == f64::NEG_INFINITY {
                Wire::Tok("-Inf".into())
            } else {
                Wire::Num(v)
            }
        })
        .collect();
    wire.serialize(s)
}

fn de_values<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    let wire: Vec<Wire> = Vec::deserialize(d)?;
    wire.into_iter()
        .map(|w| match w {
            Wire::Num(v) => Ok(v),
            Wire::Tok(t) => match t.as_str() {
                "NaN" | "nan" => Ok(f64::NAN),
                "Inf" | "Infinity" | "inf" => Ok(f64::INFINITY),
                "-Inf" | "-Infinity" | "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("unknown value token {other:?}"))),
            },
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    Exception,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorInfo {
    #[serde(rename = "type")]
    pub type_name: String,
    pub message: String,
    #[serde(default)]
    pub trace: String,
}

/// What a runner writes to its `--emit` path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub status: RecordStatus,
    #[serde(default)]
    pub error: Option<ErrorInfo>,
    #[serde(default)]
    pub outputs: Vec<NumericCapture>,
    #[serde(default)]
    pub api_calls_observed: Vec<String>,
    #[serde(default)]
    pub duration_ms: u64,
}

/// Quote bare `NaN`, `Inf`, `-Inf`, `Infinity` and `-Infinity` tokens that
/// appear outside strings, so records written by lenient JSON emitters parse.
fn quote_special_tokens(text: &str) -> String {
    const TOKENS: &[(&str, &str)] = &[
        ("-Infinity", "\"-Inf\""),
        ("Infinity", "\"Inf\""),
        ("-Inf", "\"-Inf\""),
        ("Inf", "\"Inf\""),
        ("NaN", "\"NaN\""),
    ];
    let mut out = String::with_capacity(text.len() + 16);
    let mut in_str = false;
    let mut escaped = false;
    let mut i = 0;
    let bytes = text.as_bytes();
    'outer: while i < bytes.len() {
        let c = bytes[i];
        if in_str {
            if escaped {
                escaped = false;
            } else if c == b'\\' {
                escaped = true;
            } else if c == b'"' {
                in_str = false;
            }
        } else if c == b'"' {
            in_str = true;
        } else {
            for (tok, rep) in TOKENS {
                if text[i..].starts_with(tok) {
                    let next = bytes.get(i + tok.len()).copied().unwrap_or(b' ');
                    if !next.is_ascii_alphanumeric() {
                        out.push_str(rep);
                        i += tok.len();
                        continue 'outer;
                    }
                }
            }
        }
        let ch = text[i..].chars().next().expect("in bounds");
        out.push(ch);
        i += ch.len_utf8();
    }
    out
}

impl ResultRecord {
    pub fn parse(text: &str) -> Result<Self, String> {
        if text.trim().is_empty() {
            return Err("empty result record".into());
        }
        let rec: ResultRecord = serde_json::from_str(&quote_special_tokens(text)).map_err(|e| e.to_string())?;
        for o in &rec.outputs {
            o.check()?;
        }
        match (rec.status, &rec.error) {
            (RecordStatus::Ok, Some(_)) => Err("status ok with an error attached".into()),
            (RecordStatus::Exception, None) => Err("status exception without error details".into()),
            _ => Ok(rec),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}
