use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::onion::PartyId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Send,
    Drop,
    Deliver,
    Discard,
    Fail,
    Abort,
    /// Onion arriving at a party that has aborted.
    Held,
    /// Unexpected or duplicate checkpoint nonce.
    Anomaly,
    /// Packet carrying more real onions than the padded size.
    Overflow,
}

/// One line of the event log. The field set is fixed: `round`, `from`, `to`,
/// `size_class`, `kind`. Party-local events use `from == to`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub round: u32,
    pub from: PartyId,
    pub to: PartyId,
    pub size_class: u32,
    pub kind: EventKind,
}

pub fn write_events<W: Write>(events: &[Event], mut w: W) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
