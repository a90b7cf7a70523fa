//! Geo-broadcast with contention-based forwarding.
//!
//! Every in-area node that decodes a geo-broadcast arms a timer inversely
//! related to its distance from the last forwarder; whoever fires first
//! rebroadcasts and the copy suppresses the others. The two protocol
//! generations differ in how duplicates are treated:
//!
//! * `R1` cancels its timer on *any* duplicate — and, having forgotten the
//!   message, will happily arm again for a third copy.
//! * `R2` cancels only when the duplicate's sender is at least as far from
//!   the original sender as the node itself (a better-placed forwarder),
//!   remembers handled messages in a bounded per-source duplicate list, and
//!   stretches its timer so it never fires before its own DCC gate opens.

use std::collections::{HashMap, VecDeque};

use crate::engine::{EventHandle, SimDur};
use crate::mobility::{DestinationArea, Geometry, NodeId, PositionVector, Release};

/// Traffic class used for first transmission of a packet by its source.
pub const TC_SOURCE: usize = 0;
/// Traffic class used for forwarded copies.
pub const TC_FORWARD: usize = 3;

pub const DEFAULT_HOP_LIMIT: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MsgKey {
    pub src: NodeId,
    pub sn: u16,
}

/// A geo-broadcast frame as it travels hop to hop. `so_pv` is pinned at the
/// source; `sender_pv` is rewritten by each forwarder.
#[derive(Debug, Clone)]
pub struct GbcPacket {
    pub source_id: NodeId,
    pub sn: u16,
    pub so_pv: PositionVector,
    pub sender_pv: PositionVector,
    pub area: DestinationArea,
    pub hop_limit: u8,
    pub tc: usize,
    pub bytes: u32,
}

impl GbcPacket {
    pub fn key(&self) -> MsgKey {
        MsgKey {
            src: self.source_id,
            sn: self.sn,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CbfParams {
    pub to_max: SimDur,
    pub to_min: SimDur,
    pub dist_max: f64,
    pub dpl_cap: usize,
}

impl Default for CbfParams {
    fn default() -> Self {
        CbfParams {
            to_max: SimDur::from_millis(100),
            to_min: SimDur::from_millis(1),
            dist_max: 1_000.0,
            dpl_cap: 32,
        }
    }
}

/// Contention timer: linear from `to_max` at zero progress down to `to_min`
/// at `dist_max`, and pinned at `to_min` beyond.
pub fn compute_timer_r1(p: &CbfParams, prog_m: f64) -> SimDur {
    if prog_m >= p.dist_max {
        return p.to_min;
    }
    let span = (p.to_max.as_micros() - p.to_min.as_micros()) as f64;
    let us = p.to_max.as_micros() as f64 - span * prog_m / p.dist_max;
    SimDur::from_micros(us.round() as u64)
}

/// Second-generation timer: same curve, but never shorter than the wait for
/// the node's own transmit gate, so expiry implies permission to send.
pub fn compute_timer_r2(p: &CbfParams, prog_m: f64, dcc_wait: SimDur) -> SimDur {
    compute_timer_r1(p, prog_m.min(p.dist_max)).max(dcc_wait)
}

/// Does a duplicate heard from `dup_sender` suppress us? Yes when it is at
/// least as far from the sender we armed against as we are — it covers no
/// less new ground. Ties suppress.
pub fn better_forwarder_cancels(
    geo: &Geometry,
    dup_sender: &PositionVector,
    ref_sender: &PositionVector,
    own: &PositionVector,
) -> bool {
    let dup_d = geo.dist(dup_sender.x, dup_sender.y, ref_sender.x, ref_sender.y);
    let own_d = geo.dist(own.x, own.y, ref_sender.x, ref_sender.y);
    dup_d >= own_d
}

#[derive(Debug)]
struct CbfEntry {
    handle: EventHandle,
    /// Sender the timer was computed against.
    ref_sender: PositionVector,
    receptions: u32,
    packet: GbcPacket,
}

/// What the caller must do after feeding a reception in.
#[derive(Debug)]
pub enum RxOutcome {
    /// Own packet or outside the destination area: drop silently.
    Ignored,
    /// Duplicate suppressed the pending timer: cancel this handle.
    CancelTimer { handle: EventHandle },
    /// Duplicate heard but the pending timer stays armed.
    TimerKept,
    /// Already handled (duplicate list); no timer, no delivery.
    DplDrop,
    /// Fresh message: deliver upward and schedule an expiry after `delay`,
    /// then commit the event handle via [`GeonetLayer::commit_arm`].
    Arm { delay: SimDur },
}

#[derive(Debug)]
pub enum Expiry {
    /// Rebroadcast this (rewritten) packet.
    Forward(GbcPacket),
    /// Hop budget exhausted; nothing leaves this node.
    HopExhausted,
}

/// Per-node forwarding state.
#[derive(Debug, Default)]
pub struct GeonetLayer {
    entries: HashMap<MsgKey, CbfEntry>,
    /// Per-source FIFO of recently handled sequence numbers (second
    /// generation only).
    dpl: HashMap<NodeId, VecDeque<u16>>,
    next_sn: u16,
    params: CbfParams,
}

impl GeonetLayer {
    pub fn new(params: CbfParams) -> GeonetLayer {
        GeonetLayer {
            params,
            ..GeonetLayer::default()
        }
    }

    pub fn params(&self) -> &CbfParams {
        &self.params
    }

    pub fn pending_timers(&self) -> usize {
        self.entries.len()
    }

    pub fn has_entry(&self, key: &MsgKey) -> bool {
        self.entries.contains_key(key)
    }

    /// Builds a fresh source packet with the next sequence number.
    pub fn originate(
        &mut self,
        source_id: NodeId,
        pv: PositionVector,
        area: DestinationArea,
        bytes: u32,
    ) -> GbcPacket {
        let sn = self.next_sn;
        self.next_sn = self.next_sn.wrapping_add(1);
        GbcPacket {
            source_id,
            sn,
            so_pv: pv,
            sender_pv: pv,
            area,
            hop_limit: DEFAULT_HOP_LIMIT,
            tc: TC_SOURCE,
            bytes,
        }
    }

    fn dpl_contains(&self, key: &MsgKey) -> bool {
        self.dpl
            .get(&key.src)
            .is_some_and(|q| q.contains(&key.sn))
    }

    fn dpl_insert(&mut self, key: MsgKey) {
        let q = self.dpl.entry(key.src).or_default();
        if q.len() == self.params.dpl_cap {
            q.pop_front();
        }
        q.push_back(key.sn);
    }

    #[cfg(test)]
    fn dpl_len(&self, src: NodeId) -> usize {
        self.dpl.get(&src).map_or(0, |q| q.len())
    }

    /// Feeds one decoded reception through the forwarding rules.
    /// `dcc_wait` is how long this node's transmit gate stays shut from now.
    pub fn on_receive(
        &mut self,
        geo: &Geometry,
        release: Release,
        self_id: NodeId,
        self_pv: &PositionVector,
        packet: &GbcPacket,
        dcc_wait: SimDur,
    ) -> RxOutcome {
        if packet.source_id == self_id {
            return RxOutcome::Ignored;
        }
        if !packet.area.contains(geo, self_pv.x, self_pv.y) {
            return RxOutcome::Ignored;
        }
        let key = packet.key();

        if let Some(entry) = self.entries.get_mut(&key) {
            let cancel = match release {
                Release::R1 => true,
                Release::R2 => better_forwarder_cancels(
                    geo,
                    &packet.sender_pv,
                    &entry.ref_sender,
                    self_pv,
                ),
            };
            if cancel {
                let handle = entry.handle;
                self.entries.remove(&key);
                return RxOutcome::CancelTimer { handle };
            }
            entry.receptions += 1;
            return RxOutcome::TimerKept;
        }

        if release == Release::R2 {
            if self.dpl_contains(&key) {
                return RxOutcome::DplDrop;
            }
            self.dpl_insert(key);
        }

        let prog = geo.dist(self_pv.x, self_pv.y, packet.sender_pv.x, packet.sender_pv.y);
        let delay = match release {
            Release::R1 => compute_timer_r1(&self.params, prog),
            Release::R2 => compute_timer_r2(&self.params, prog, dcc_wait),
        };
        self.entries.insert(
            key,
            CbfEntry {
                handle: EventHandle::UNSET,
                ref_sender: packet.sender_pv,
                receptions: 1,
                packet: packet.clone(),
            },
        );
        RxOutcome::Arm { delay }
    }

    /// Records the scheduled expiry event for an entry just armed.
    pub fn commit_arm(&mut self, key: &MsgKey, handle: EventHandle) {
        let entry = self
            .entries
            .get_mut(key)
            .expect("arming a timer for a missing entry");
        assert_eq!(entry.handle, EventHandle::UNSET, "entry armed twice");
        entry.handle = handle;
    }

    /// The contention timer fired: hand back the packet to rebroadcast, with
    /// this node stamped as sender and one hop spent.
    pub fn timer_expired(&mut self, key: &MsgKey, self_pv: PositionVector) -> Expiry {
        let entry = self
            .entries
            .remove(key)
            .expect("timer fired for a missing entry");
        if entry.packet.hop_limit <= 1 {
            return Expiry::HopExhausted;
        }
        let mut pkt = entry.packet;
        pkt.sender_pv = self_pv;
        pkt.hop_limit -= 1;
        pkt.tc = TC_FORWARD;
        Expiry::Forward(pkt)
    }
}
