//! On-disk policy tables.
//!
//! An ASCII header, one `key value` pair per line, terminated by `end`,
//! followed by one byte per state in the documented state order
//! (0 = sleep, 1 = unicast, 2 = push):
//!
//! ```text
//! pushcell-policy 1
//! order ((E*(2M+1))+qi)*(N+1)+C; qi: (0,0)=0 (m,0)=2m-1 (m,1)=2m
//! e_max 50
//! classes 5
//! contents 20
//! states 11781
//! end
//! ```

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::mdp::{Action, StateSpace};
use crate::policy::StationaryPolicy;

const MAGIC: &str = "pushcell-policy 1";
const ORDER: &str = "((E*(2M+1))+qi)*(N+1)+C; qi: (0,0)=0 (m,0)=2m-1 (m,1)=2m";

pub fn write_policy(out: &mut impl Write, policy: &StationaryPolicy) -> Result<()> {
    let sp = policy.space();
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "order {ORDER}")?;
    writeln!(out, "e_max {}", sp.battery_units)?;
    writeln!(out, "classes {}", sp.classes)?;
    writeln!(out, "contents {}", sp.contents)?;
    writeln!(out, "states {}", sp.len())?;
    writeln!(out, "end")?;
    let bytes: Vec<u8> = policy.actions().iter().map(|&a| a as u8).collect();
    out.write_all(&bytes)?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::PolicyFile(msg.into())
}

pub fn read_policy(input: impl Read) -> Result<StationaryPolicy> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    let mut next_line = |reader: &mut BufReader<_>| -> Result<String> {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(bad("truncated header"));
        }
        Ok(line.trim_end_matches(['\n', '\r']).to_string())
    };
    if next_line(&mut reader)? != MAGIC {
        return Err(bad("missing `pushcell-policy 1` magic line"));
    }
    let (mut e_max, mut classes, mut contents, mut states) = (None, None, None, None);
    loop {
        let l = next_line(&mut reader)?;
        if l == "end" {
            break;
        }
        let (key, value) = l.split_once(' ').ok_or_else(|| bad(format!("malformed line `{l}`")))?;
        let num = || value.trim().parse::<u64>().map_err(|_| bad(format!("bad number in `{l}`")));
        match key {
            "order" => {
                if value != ORDER {
                    return Err(bad(format!("unsupported state order `{value}`")));
                }
            }
            "e_max" => e_max = Some(num()? as u32),
            "classes" => classes = Some(num()? as u32),
            "contents" => contents = Some(num()? as u32),
            "states" => states = Some(num()? as usize),
            _ => return Err(bad(format!("unknown header key `{key}`"))),
        }
    }
    let missing = |k: &str| bad(format!("header lacks `{k}`"));
    let space = StateSpace::new(
        e_max.ok_or_else(|| missing("e_max"))?,
        classes.ok_or_else(|| missing("classes"))?,
        contents.ok_or_else(|| missing("contents"))?,
    );
    let states = states.ok_or_else(|| missing("states"))?;
    if states != space.len() {
        return Err(bad(format!("header says {states} states, dimensions give {}", space.len())));
    }
    let mut body = Vec::with_capacity(states);
    reader.read_to_end(&mut body)?;
    if body.len() != states {
        return Err(bad(format!("expected {states} action bytes, found {}", body.len())));
    }
    let actions = body
        .iter()
        .map(|&b| Action::from_u8(b).ok_or_else(|| bad(format!("invalid action byte {b}"))))
        .collect::<Result<Vec<_>>>()?;
    StationaryPolicy::new(space, actions)
}
