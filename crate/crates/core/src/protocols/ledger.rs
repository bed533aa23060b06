use std::fmt;

use crate::sparsify::BitCost;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageKind {
    /// Sparsified iterate passed to the next machine.
    Handoff,
    /// Sparsified output sent to the final machine.
    Output,
    /// Per-machine average in the high-probability output rule.
    Average,
    /// Shared randomness (projection seeds).
    Seed,
    /// Uncompressed vector, 64 bits per entry.
    Dense,
    /// Top-k truncated example.
    Truncated,
    /// Spectral handoff of a matrix iterate.
    Spectral,
    /// Sketched state passed between machines.
    Sketch,
}

impl MessageKind {
    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Handoff => "handoff",
            MessageKind::Output => "output",
            MessageKind::Average => "average",
            MessageKind::Seed => "seed",
            MessageKind::Dense => "dense",
            MessageKind::Truncated => "truncated",
            MessageKind::Spectral => "spectral",
            MessageKind::Sketch => "sketch",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerEntry {
    /// Sending machine.
    pub machine: usize,
    pub kind: MessageKind,
    pub cost: BitCost,
}

/// Every bit sent, attributed to its sender. Entries stay in send order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommLedger {
    per_machine: Vec<u64>,
    entries: Vec<LedgerEntry>,
}

impl CommLedger {
    pub fn new(machines: usize) -> Self {
        CommLedger { per_machine: vec![0; machines], entries: Vec::new() }
    }

    pub fn record(&mut self, machine: usize, kind: MessageKind, cost: BitCost) {
        if machine >= self.per_machine.len() {
            self.per_machine.resize(machine + 1, 0);
        }
        self.per_machine[machine] += cost.total_bits;
        self.entries.push(LedgerEntry { machine, kind, cost });
    }

    pub fn machines(&self) -> usize {
        self.per_machine.len()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn per_machine_bits(&self) -> &[u64] {
        &self.per_machine
    }

    pub fn total_bits(&self) -> u64 {
        self.per_machine.iter().sum()
    }

    pub fn max_machine_bits(&self) -> u64 {
        self.per_machine.iter().copied().max().unwrap_or(0)
    }

    pub fn bits_of_kind(&self, kind: MessageKind) -> u64 {
        self.entries.iter().filter(|e| e.kind == kind).map(|e| e.cost.total_bits).sum()
    }

    /// Appends `other` with machine ids shifted by `offset`.
    pub fn absorb(&mut self, other: &CommLedger, offset: usize) {
        for e in &other.entries {
            self.record(e.machine + offset, e.kind, e.cost);
        }
    }

    /// `machine,kind,bits`, one line per message.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("machine,kind,bits\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{}\n", e.machine, e.kind, e.cost.total_bits));
        }
        out
    }
}

/// Cost of `len` raw `f64` values.
pub fn dense_cost(len: usize) -> BitCost {
    BitCost::new(0, 64 * len as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_and_csv() {
        let mut l = CommLedger::new(2);
        l.record(0, MessageKind::Handoff, BitCost::new(97, 10));
        l.record(1, MessageKind::Output, BitCost::new(97, 3));
        l.record(3, MessageKind::Dense, dense_cost(2));
        assert_eq!(l.per_machine_bits(), &[107, 100, 0, 128]);
        assert_eq!(l.total_bits(), 335);
        assert_eq!(l.max_machine_bits(), 128);
        assert_eq!(l.bits_of_kind(MessageKind::Output), 100);
        assert_eq!(l.to_csv(), "machine,kind,bits\n0,handoff,107\n1,output,100\n3,dense,128\n");
        let mut m = CommLedger::new(1);
        m.absorb(&l, 2);
        assert_eq!(m.per_machine_bits(), &[0, 0, 107, 100, 0, 128]);
    }
}
