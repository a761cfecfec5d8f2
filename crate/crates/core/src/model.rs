//! Plain-text model files.
//!
//! Grammar (one directive per line, `#` starts a comment):
//!
//! ```text
//! species: S I                       # ordered species names
//! reaction: S + I -> 2 I @ 1         # reactant -> product @ rate constant
//! reaction: I -> S @ 0.5
//! status: S~ = S initial             # status name = species [initial]
//! status: I~ = I initial
//! track: 1 : S~ -> I~ @ 1            # reaction no. (1-based) : from -> to @ prob
//! track: 1 : I~ -> I~ @ 1
//! track: 2 : I~ -> S~ @ 1            # `delta` as destination = degradation
//! init: S = 0.99 I = 0.01            # fluid initial concentrations
//! ```
//!
//! Complexes are `0` (empty) or `+`-separated terms; a term is a species name
//! with an optional integer coefficient (`2 I` and `2I` both parse).
//! Probabilities accept decimals and fractions (`1/2`). Unknown names are
//! rejected with the offending line number. Parsing the output of
//! [`serialize`] yields the identical model.

use std::fmt::Write as _;

use thiserror::Error;

use crate::network::{Complex, Reaction, ReactionNetwork, Status, StatusSchema};

#[derive(Debug, Clone)]
pub struct Model {
    pub network: ReactionNetwork,
    pub schema: Option<StatusSchema>,
    /// Fluid initial concentrations, in species order (defaults to zeros).
    pub init: Vec<f64>,
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.network == other.network && self.schema == other.schema && self.init == other.init
    }
}

#[derive(Debug, Error)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        msg: msg.into(),
    })
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && !s.chars().next().unwrap().is_ascii_digit()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '~' | '*' | '\''))
}

fn parse_complex(s: &str, species: &[String], line: usize) -> Result<Complex, ParseError> {
    let s = s.trim();
    if s == "0" {
        return Ok(Complex::empty());
    }
    let mut pairs = Vec::new();
    for term in s.split('+') {
        let term = term.trim();
        if term.is_empty() {
            return err(line, "empty term in complex");
        }
        let digits: String = term.chars().take_while(|c| c.is_ascii_digit()).collect();
        let name = term[digits.len()..].trim();
        let count: u32 = if digits.is_empty() {
            1
        } else {
            digits
                .parse()
                .map_err(|_| ParseError {
                    line,
                    msg: format!("bad coefficient `{digits}`"),
                })?
        };
        if count == 0 {
            return err(line, format!("zero coefficient for `{name}`"));
        }
        let idx = species
            .iter()
            .position(|x| x == name)
            .ok_or_else(|| ParseError {
                line,
                msg: format!("unknown species `{name}`"),
            })?;
        pairs.push((idx, count));
    }
    Ok(Complex::from_pairs(pairs))
}

fn parse_number(s: &str, line: usize) -> Result<f64, ParseError> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: f64 = num.trim().parse().map_err(|_| ParseError {
            line,
            msg: format!("bad number `{s}`"),
        })?;
        let d: f64 = den.trim().parse().map_err(|_| ParseError {
            line,
            msg: format!("bad number `{s}`"),
        })?;
        if d == 0.0 {
            return err(line, "division by zero");
        }
        Ok(n / d)
    } else {
        s.parse().map_err(|_| ParseError {
            line,
            msg: format!("bad number `{s}`"),
        })
    }
}

pub fn parse(text: &str) -> Result<Model, ParseError> {
    let mut species: Vec<String> = Vec::new();
    let mut reactions: Vec<Reaction> = Vec::new();
    let mut statuses: Vec<String> = Vec::new();
    let mut sigma: Vec<usize> = Vec::new();
    let mut initial: Vec<bool> = Vec::new();
    let mut tracks: Vec<((usize, usize, Status), f64)> = Vec::new();
    let mut init: Vec<(usize, f64)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap().trim();
        if content.is_empty() {
            continue;
        }
        let (key, rest) = match content.split_once(':') {
            Some(kv) => kv,
            None => return err(line, format!("expected `key: value`, got `{content}`")),
        };
        match key.trim() {
            "species" => {
                for name in rest.split_whitespace() {
                    if !valid_name(name) {
                        return err(line, format!("invalid species name `{name}`"));
                    }
                    if species.iter().any(|s| s == name) {
                        return err(line, format!("duplicate species `{name}`"));
                    }
                    species.push(name.to_string());
                }
            }
            "reaction" => {
                let (lhs, tail) = rest
                    .split_once("->")
                    .ok_or_else(|| ParseError {
                        line,
                        msg: "reaction needs `->`".into(),
                    })?;
                let (rhs, rate) = tail.split_once('@').ok_or_else(|| ParseError {
                    line,
                    msg: "reaction needs `@ rate`".into(),
                })?;
                let reactant = parse_complex(lhs, &species, line)?;
                let product = parse_complex(rhs, &species, line)?;
                let rate_constant = parse_number(rate, line)?;
                if !(rate_constant > 0.0) {
                    return err(line, "rate constant must be positive");
                }
                reactions.push(Reaction {
                    reactant,
                    product,
                    rate_constant,
                });
            }
            "status" => {
                let (name, tail) = rest.split_once('=').ok_or_else(|| ParseError {
                    line,
                    msg: "status needs `name = species`".into(),
                })?;
                let name = name.trim();
                if !valid_name(name) {
                    return err(line, format!("invalid status name `{name}`"));
                }
                if statuses.iter().any(|s| s == name) {
                    return err(line, format!("duplicate status `{name}`"));
                }
                let mut words = tail.split_whitespace();
                let sp = words.next().unwrap_or("");
                let is_initial = match words.next() {
                    None => false,
                    Some("initial") => true,
                    Some(w) => return err(line, format!("unexpected token `{w}`")),
                };
                let idx = species
                    .iter()
                    .position(|x| x == sp)
                    .ok_or_else(|| ParseError {
                        line,
                        msg: format!("unknown species `{sp}`"),
                    })?;
                statuses.push(name.to_string());
                sigma.push(idx);
                initial.push(is_initial);
            }
            "track" => {
                let (rno, tail) = rest.split_once(':').ok_or_else(|| ParseError {
                    line,
                    msg: "track needs `reaction : from -> to @ prob`".into(),
                })?;
                let rno: usize = rno.trim().parse().map_err(|_| ParseError {
                    line,
                    msg: format!("bad reaction number `{}`", rno.trim()),
                })?;
                if rno == 0 || rno > reactions.len() {
                    return err(line, format!("reaction number {rno} out of range"));
                }
                let (from, tail) = tail.split_once("->").ok_or_else(|| ParseError {
                    line,
                    msg: "track needs `from -> to`".into(),
                })?;
                let (to, prob) = tail.split_once('@').ok_or_else(|| ParseError {
                    line,
                    msg: "track needs `@ prob`".into(),
                })?;
                let from = from.trim();
                let to = to.trim();
                let from_idx =
                    statuses
                        .iter()
                        .position(|s| s == from)
                        .ok_or_else(|| ParseError {
                            line,
                            msg: format!("unknown status `{from}`"),
                        })?;
                let to_status = if to == "delta" {
                    Status::Cemetery
                } else {
                    Status::Alive(statuses.iter().position(|s| s == to).ok_or_else(|| {
                        ParseError {
                            line,
                            msg: format!("unknown status `{to}`"),
                        }
                    })?)
                };
                let p = parse_number(prob, line)?;
                if !(0.0..=1.0).contains(&p) {
                    return err(line, format!("probability {p} outside [0, 1]"));
                }
                tracks.push(((rno - 1, from_idx, to_status), p));
            }
            "init" => {
                // `name = value` pairs; values may not contain whitespace.
                let mut flat: Vec<String> = Vec::new();
                for t in rest.split_whitespace() {
                    for piece in t.split('=') {
                        if !piece.is_empty() {
                            flat.push(piece.to_string());
                        }
                    }
                }
                if flat.len() % 2 != 0 {
                    return err(line, "init needs `name = value` pairs");
                }
                for pair in flat.chunks(2) {
                    let idx = species
                        .iter()
                        .position(|x| *x == pair[0])
                        .ok_or_else(|| ParseError {
                            line,
                            msg: format!("unknown species `{}`", pair[0]),
                        })?;
                    let v = parse_number(&pair[1], line)?;
                    if v < 0.0 {
                        return err(line, "initial concentration must be non-negative");
                    }
                    init.push((idx, v));
                }
            }
            other => return err(line, format!("unknown directive `{other}`")),
        }
    }

    if species.is_empty() {
        return err(0, "model declares no species");
    }
    let network = ReactionNetwork::new(species.clone(), reactions).map_err(|e| ParseError {
        line: 0,
        msg: e.to_string(),
    })?;
    let schema = if statuses.is_empty() {
        None
    } else {
        Some(StatusSchema::new(statuses, sigma, initial, tracks))
    };
    let mut init_vec = vec![0.0; species.len()];
    for (idx, v) in init {
        init_vec[idx] = v;
    }
    Ok(Model {
        network,
        schema,
        init: init_vec,
    })
}

/// Canonical text form; `parse(serialize(m)) == m`.
pub fn serialize(model: &Model) -> String {
    let mut out = String::new();
    let species = model.network.species();
    writeln!(out, "species: {}", species.join(" ")).unwrap();
    for r in model.network.reactions() {
        writeln!(
            out,
            "reaction: {} -> {} @ {}",
            r.reactant.format_with(species),
            r.product.format_with(species),
            r.rate_constant
        )
        .unwrap();
    }
    if let Some(schema) = &model.schema {
        for (i, name) in schema.statuses().iter().enumerate() {
            writeln!(
                out,
                "status: {} = {}{}",
                name,
                species[schema.sigma(i)],
                if schema.is_initial(i) { " initial" } else { "" }
            )
            .unwrap();
        }
        for (reaction, from, to, p) in schema.entries() {
            let to_name = match to {
                Status::Cemetery => "delta".to_string(),
                Status::Alive(t) => schema.statuses()[t].clone(),
            };
            writeln!(
                out,
                "track: {} : {} -> {} @ {}",
                reaction + 1,
                schema.statuses()[from],
                to_name,
                p
            )
            .unwrap();
        }
    }
    if model.init.iter().any(|&v| v != 0.0) {
        let pairs: Vec<String> = species
            .iter()
            .zip(&model.init)
            .map(|(s, v)| format!("{s} = {v}"))
            .collect();
        writeln!(out, "init: {}", pairs.join(" ")).unwrap();
    }
    out
}
