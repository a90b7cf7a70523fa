//! Run measurement and CSV reporting.
//!
//! A [`MetricsCollector`] is a streaming [`TraceSink`]: it folds every record
//! into per-message tallies on the fly (full runs emit far too many records
//! to buffer). Per message it tracks who was inside the destination area when
//! the message was born (the delivery-ratio denominator), who got it within
//! the message lifetime, transmission counts, and per-distance-bin coverage;
//! per node it audits transmit pacing against the minimum gate interval.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::engine::{SimDur, SimTime};
use crate::geonet::MsgKey;
use crate::mobility::{Fleet, Geometry, NodeId, Release};
use crate::trace::{TraceKind, TraceRecord, TraceSink};

pub const NUM_BINS: usize = 40;
const NON_MEMBER: u8 = u8::MAX;

#[derive(Debug)]
struct Tally {
    gen_at: SimTime,
    deadline: SimTime,
    measured: bool,
    /// Distance bin of each in-area node at generation; `NON_MEMBER` outside.
    member_bin: Vec<u8>,
    received: Vec<bool>,
    arm_count: Vec<u8>,
    /// Per node, the value of the node's arm counter at its most recent
    /// contention arm for this message (0 = never armed).
    last_arm_seq: Vec<u64>,
    members: u32,
    members_received: u32,
    tx_count: u64,
    bin_expected: [u32; NUM_BINS],
    bin_received: [u32; NUM_BINS],
}

#[derive(Debug, Clone)]
pub struct MessageReport {
    pub sn: u16,
    pub gen_at: SimTime,
    pub tx_count: u64,
    pub members: u32,
    pub members_received: u32,
    pub pdr: f64,
    pub bin_expected: [u32; NUM_BINS],
    pub bin_received: [u32; NUM_BINS],
}

#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub penetration: f64,
    pub seed: u64,
    /// Messages born inside the measurement window, in sequence order.
    pub messages: Vec<MessageReport>,
    pub gap_violations: u64,
    /// Second contention arms by duplicate-tracking nodes while the message
    /// was still within duplicate-list capacity — always a protocol failure.
    pub rearm_violations: u64,
    /// Second contention arms after the message's identifier aged out of the
    /// bounded duplicate list (32 fresher arms in between). Correct list
    /// behavior under sustained echo traffic; reported for visibility.
    pub dpl_eviction_rearms: u64,
    /// Largest per-node share of the run spent transmitting.
    pub max_occupancy: f64,
    pub total_tx: u64,
    pub total_collisions: u64,
    pub total_queue_drops: u64,
    pub bin_width_m: f64,
    pub area_half_length: f64,
}

impl RunMetrics {
    pub fn mean_tx(&self) -> f64 {
        mean(self.messages.iter().map(|m| m.tx_count as f64))
    }

    pub fn mean_pdr(&self) -> f64 {
        mean(self.messages.iter().map(|m| m.pdr))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0u64;
    for v in it {
        sum += v;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

pub struct MetricsCollector {
    penetration: f64,
    seed: u64,
    source: NodeId,
    source_x: f64,
    geo: Geometry,
    area_half_length: f64,
    bin_width_m: f64,
    releases: Vec<Release>,
    n_nodes: usize,
    /// Indexed by sequence number; the source numbers messages densely.
    msgs: Vec<Option<Tally>>,
    measure_start: SimTime,
    measure_end: SimTime,
    min_gate_gap: SimDur,
    dpl_cap: u64,
    last_tx: Vec<Option<(SimTime, SimDur)>>,
    airtime_us: Vec<u64>,
    /// Per node, how many contention arms it has performed across all
    /// messages. Each arm is exactly one duplicate-list insert, so the gap
    /// between two arm sequence numbers tells whether a FIFO list of
    /// `dpl_cap` entries could still remember the earlier one.
    arm_seq: Vec<u64>,
    gap_violations: u64,
    rearm_violations: u64,
    dpl_eviction_rearms: u64,
    total_tx: u64,
    total_collisions: u64,
    total_queue_drops: u64,
}

impl MetricsCollector {
    pub fn new(
        fleet: &Fleet,
        penetration: f64,
        seed: u64,
        measure_start: SimTime,
        measure_end: SimTime,
        min_gate_gap: SimDur,
        dpl_cap: usize,
    ) -> MetricsCollector {
        let n = fleet.len();
        let src_pv = fleet.position_at(fleet.source, SimTime::ZERO);
        MetricsCollector {
            penetration,
            seed,
            source: fleet.source,
            source_x: src_pv.x,
            geo: fleet.geo,
            area_half_length: fleet.area.half_length,
            bin_width_m: 2.0 * fleet.area.half_length / NUM_BINS as f64,
            releases: fleet.nodes.iter().map(|v| v.release).collect(),
            n_nodes: n,
            msgs: Vec::new(),
            measure_start,
            measure_end,
            min_gate_gap,
            dpl_cap: dpl_cap as u64,
            last_tx: vec![None; n],
            airtime_us: vec![0; n],
            arm_seq: vec![0; n],
            gap_violations: 0,
            rearm_violations: 0,
            dpl_eviction_rearms: 0,
            total_tx: 0,
            total_collisions: 0,
            total_queue_drops: 0,
        }
    }

    fn bin_of(&self, x: f64) -> usize {
        let delta = self.geo.signed_delta(x, self.source_x);
        let idx = ((delta + self.area_half_length) / self.bin_width_m).floor();
        (idx.max(0.0) as usize).min(NUM_BINS - 1)
    }

    /// Opens the tally for a freshly originated message. Membership (the
    /// delivery-ratio denominator) is the in-area population at this instant,
    /// source excluded.
    pub fn register_message(
        &mut self,
        key: MsgKey,
        gen_at: SimTime,
        lifetime: SimDur,
        fleet: &Fleet,
    ) {
        assert_eq!(key.src, self.source, "tallies track source messages only");
        let sn = key.sn as usize;
        if self.msgs.len() <= sn {
            self.msgs.resize_with(sn + 1, || None);
        }
        assert!(self.msgs[sn].is_none(), "sequence number reused");

        let mut member_bin = vec![NON_MEMBER; self.n_nodes];
        let mut bin_expected = [0u32; NUM_BINS];
        let mut members = 0u32;
        for n in 0..self.n_nodes as NodeId {
            if n == self.source || !fleet.in_area_at(n, gen_at) {
                continue;
            }
            let bin = self.bin_of(fleet.position_at(n, gen_at).x);
            member_bin[n as usize] = bin as u8;
            bin_expected[bin] += 1;
            members += 1;
        }
        self.msgs[sn] = Some(Tally {
            gen_at,
            deadline: gen_at + lifetime,
            measured: gen_at >= self.measure_start && gen_at < self.measure_end,
            member_bin,
            received: vec![false; self.n_nodes],
            arm_count: vec![0; self.n_nodes],
            last_arm_seq: vec![0; self.n_nodes],
            members,
            members_received: 0,
            tx_count: 0,
            bin_expected,
            bin_received: [0; NUM_BINS],
        });
    }

    fn tally_mut(&mut self, key: &MsgKey) -> &mut Tally {
        self.msgs
            .get_mut(key.sn as usize)
            .and_then(Option::as_mut)
            .expect("trace for an unregistered message")
    }

    /// Folds the run into its report. `ran_until` is the simulated horizon,
    /// the denominator for air-occupancy shares.
    pub fn finish(self, ran_until: SimTime) -> RunMetrics {
        let max_occupancy = self
            .airtime_us
            .iter()
            .map(|&us| us as f64 / ran_until.as_micros() as f64)
            .fold(0.0, f64::max);
        let mut messages = Vec::new();
        for (sn, tally) in self.msgs.into_iter().enumerate() {
            let Some(t) = tally else { continue };
            if !t.measured {
                continue;
            }
            let pdr = if t.members == 0 {
                1.0
            } else {
                t.members_received as f64 / t.members as f64
            };
            messages.push(MessageReport {
                sn: sn as u16,
                gen_at: t.gen_at,
                tx_count: t.tx_count,
                members: t.members,
                members_received: t.members_received,
                pdr,
                bin_expected: t.bin_expected,
                bin_received: t.bin_received,
            });
        }
        RunMetrics {
            penetration: self.penetration,
            seed: self.seed,
            messages,
            gap_violations: self.gap_violations,
            rearm_violations: self.rearm_violations,
            dpl_eviction_rearms: self.dpl_eviction_rearms,
            max_occupancy,
            total_tx: self.total_tx,
            total_collisions: self.total_collisions,
            total_queue_drops: self.total_queue_drops,
            bin_width_m: self.bin_width_m,
            area_half_length: self.area_half_length,
        }
    }
}

impl TraceSink for MetricsCollector {
    fn record(&mut self, rec: &TraceRecord) {
        match rec.kind {
            TraceKind::TxStart { msg, airtime, .. } => {
                self.total_tx += 1;
                let node = rec.node as usize;
                if let Some((prev_start, prev_air)) = self.last_tx[node] {
                    if rec.t.since(prev_start) < prev_air + self.min_gate_gap {
                        self.gap_violations += 1;
                    }
                }
                self.last_tx[node] = Some((rec.t, airtime));
                self.airtime_us[node] += airtime.as_micros();
                if let Some(key) = msg {
                    self.tally_mut(&key).tx_count += 1;
                }
            }
            TraceKind::RxDelivered { msg, pos_x } => {
                if rec.node == self.source {
                    return;
                }
                let bin = self.bin_of(pos_x);
                let in_area_now = self
                    .geo
                    .signed_delta(pos_x, self.source_x)
                    .abs()
                    <= self.area_half_length;
                let node = rec.node as usize;
                let t = rec.t;
                let tally = self.tally_mut(&msg);
                if t > tally.deadline || tally.received[node] {
                    return;
                }
                tally.received[node] = true;
                match tally.member_bin[node] {
                    NON_MEMBER => {
                        // Drove in after generation: counts toward coverage
                        // where it stands now, not toward the ratio.
                        if in_area_now {
                            tally.bin_received[bin] += 1;
                        }
                    }
                    b => {
                        tally.members_received += 1;
                        tally.bin_received[b as usize] += 1;
                    }
                }
            }
            TraceKind::RxCollided { .. } => self.total_collisions += 1,
            TraceKind::CbfArm { msg, .. } => {
                let node = rec.node as usize;
                let is_r2 = self.releases[node] == Release::R2;
                self.arm_seq[node] += 1;
                let seq = self.arm_seq[node];
                let dpl_cap = self.dpl_cap;
                let tally = self.tally_mut(&msg);
                let c = &mut tally.arm_count[node];
                *c = c.saturating_add(1);
                let rearmed = *c > 1;
                let since_last = seq - tally.last_arm_seq[node];
                tally.last_arm_seq[node] = seq;
                if rearmed && is_r2 {
                    // A FIFO list of `dpl_cap` identifiers forgets an entry
                    // only after `dpl_cap` further inserts; a re-arm any
                    // sooner means the duplicate check missed a remembered
                    // message. Later than that it is ordinary FIFO aging.
                    if since_last <= dpl_cap {
                        self.rearm_violations += 1;
                    } else {
                        self.dpl_eviction_rearms += 1;
                    }
                }
            }
            TraceKind::QueueDrop { .. } => self.total_queue_drops += 1,
            _ => {}
        }
    }

    fn open_message(&mut self, key: MsgKey, gen_at: SimTime, lifetime: SimDur, fleet: &Fleet) {
        self.register_message(key, gen_at, lifetime, fleet);
    }
}

/// All runs of a parameter sweep, ready for aggregation and export.
#[derive(Debug, Clone, Default)]
pub struct SweepResults {
    pub runs: Vec<RunMetrics>,
}

impl SweepResults {
    pub fn sorted(mut self) -> SweepResults {
        self.runs.sort_by(|a, b| {
            a.penetration
                .total_cmp(&b.penetration)
                .then(a.seed.cmp(&b.seed))
        });
        self
    }

    pub fn penetrations(&self) -> Vec<f64> {
        let mut ps: Vec<f64> = Vec::new();
        for r in &self.runs {
            if !ps.contains(&r.penetration) {
                ps.push(r.penetration);
            }
        }
        ps.sort_by(f64::total_cmp);
        ps
    }

    fn runs_at(&self, pen: f64) -> impl Iterator<Item = &RunMetrics> {
        self.runs.iter().filter(move |r| r.penetration == pen)
    }

    /// Mean transmissions per message across all seeds at one penetration.
    pub fn mean_tx(&self, pen: f64) -> f64 {
        mean(
            self.runs_at(pen)
                .flat_map(|r| r.messages.iter().map(|m| m.tx_count as f64)),
        )
    }

    pub fn mean_pdr(&self, pen: f64) -> f64 {
        mean(
            self.runs_at(pen)
                .flat_map(|r| r.messages.iter().map(|m| m.pdr)),
        )
    }

    /// Per-bin mean of per-message coverage ratios, skipping empty bins.
    /// Returns (bin_floor_offset_m, mean_ratio, samples).
    pub fn bin_mean_pdr(&self, pen: f64) -> Vec<(i64, f64, u64)> {
        let Some(first) = self.runs_at(pen).next() else {
            return Vec::new();
        };
        let bin_width = first.bin_width_m;
        let half = first.area_half_length;
        let mut sums = [0.0f64; NUM_BINS];
        let mut counts = [0u64; NUM_BINS];
        for r in self.runs_at(pen) {
            for m in &r.messages {
                for b in 0..NUM_BINS {
                    if m.bin_expected[b] > 0 {
                        sums[b] += m.bin_received[b] as f64 / m.bin_expected[b] as f64;
                        counts[b] += 1;
                    }
                }
            }
        }
        (0..NUM_BINS)
            .filter(|&b| counts[b] > 0)
            .map(|b| {
                let label = (b as f64 * bin_width - half) as i64;
                (label, sums[b] / counts[b] as f64, counts[b])
            })
            .collect()
    }

    /// Writes the four report files into `dir`. Output is byte-deterministic
    /// for a given set of runs.
    pub fn write_csvs(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut ordered: Vec<&RunMetrics> = self.runs.iter().collect();
        ordered.sort_by(|a, b| {
            a.penetration
                .total_cmp(&b.penetration)
                .then(a.seed.cmp(&b.seed))
        });

        let mut tx = String::from("penetration,seed,message,tx_count\n");
        let mut pdr = String::from("penetration,seed,message,pdr\n");
        for r in &ordered {
            for m in &r.messages {
                writeln!(tx, "{},{},{},{}", r.penetration, r.seed, m.sn, m.tx_count).unwrap();
                writeln!(pdr, "{},{},{},{:.6}", r.penetration, r.seed, m.sn, m.pdr).unwrap();
            }
        }
        fs::write(dir.join("transmissions.csv"), tx)?;
        fs::write(dir.join("pdr.csv"), pdr)?;

        let mut dist = String::from("penetration,distance_bin_m,mean_pdr\n");
        for pen in self.penetrations() {
            for (label, ratio, _) in self.bin_mean_pdr(pen) {
                writeln!(dist, "{},{},{:.6}", pen, label, ratio).unwrap();
            }
        }
        fs::write(dir.join("pdr_distance.csv"), dist)?;

        let mut summary = String::from("penetration,mean_tx,mean_pdr,ratio_vs_0pct\n");
        let baseline = {
            let ps = self.penetrations();
            ps.iter().copied().find(|&p| p == 0.0).map(|p| self.mean_tx(p))
        };
        for pen in self.penetrations() {
            let mtx = self.mean_tx(pen);
            let ratio = match baseline {
                Some(b) if mtx > 0.0 => format!("{:.6}", b / mtx),
                _ => String::new(),
            };
            writeln!(summary, "{},{:.6},{:.6},{}", pen, mtx, self.mean_pdr(pen), ratio).unwrap();
        }
        fs::write(dir.join("summary.csv"), summary)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::Release;

    fn key(sn: u16) -> MsgKey {
        MsgKey { src: 0, sn }
    }

    fn rec(t_us: u64, node: NodeId, kind: TraceKind) -> TraceRecord {
        TraceRecord {
            t: SimTime::from_micros(t_us),
            node,
            kind,
        }
    }

    fn delivered(t_us: u64, node: NodeId, sn: u16, pos_x: f64) -> TraceRecord {
        rec(t_us, node, TraceKind::RxDelivered { msg: key(sn), pos_x })
    }

    fn tx(t_us: u64, node: NodeId, sn: Option<u16>, pos_x: f64, air_us: u64) -> TraceRecord {
        rec(
            t_us,
            node,
            TraceKind::TxStart {
                msg: sn.map(key),
                pos_x,
                airtime: SimDur::from_micros(air_us),
            },
        )
    }

    // Source at x=0 plus four nodes; area covers +-2000m of the source.
    fn fleet() -> Fleet {
        Fleet::line(&[0.0, 500.0, 1_000.0, 1_900.0, 3_000.0])
    }

    fn collector(fleet: &Fleet) -> MetricsCollector {
        let mut c = MetricsCollector::new(
            fleet,
            0.0,
            1,
            SimTime::ZERO,
            SimTime::from_secs(1_000),
            SimDur::from_millis(25),
            32,
        );
        c.register_message(key(0), SimTime::ZERO, SimDur::from_secs(10), fleet);
        c
    }

    fn arm(t_us: u64, node: NodeId, sn: u16) -> TraceRecord {
        rec(
            t_us,
            node,
            TraceKind::CbfArm {
                msg: key(sn),
                timer: SimDur::from_millis(50),
            },
        )
    }

    #[test]
    fn pdr_counts_distinct_members_only() {
        let f = fleet();
        let mut c = collector(&f);
        // Node 4 sits outside the area: three members (1, 2, 3).
        c.record(&delivered(1_000, 1, 0, 500.0));
        c.record(&delivered(2_000, 1, 0, 500.0)); // duplicate, ignored
        c.record(&delivered(3_000, 2, 0, 1_000.0));
        let run = c.finish(SimTime::from_secs(1));
        let m = &run.messages[0];
        assert_eq!(m.members, 3);
        assert_eq!(m.members_received, 2);
        assert!((m.pdr - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn late_deliveries_miss_the_lifetime() {
        let f = fleet();
        let mut c = collector(&f);
        c.record(&delivered(10_000_001, 1, 0, 500.0));
        let run = c.finish(SimTime::from_secs(11));
        assert_eq!(run.messages[0].members_received, 0);
    }

    #[test]
    fn source_receptions_never_count() {
        let f = fleet();
        let mut c = collector(&f);
        c.record(&delivered(1_000, 0, 0, 0.0));
        let run = c.finish(SimTime::from_secs(1));
        assert_eq!(run.messages[0].members_received, 0);
    }

    #[test]
    fn transmissions_accumulate_across_forwarders() {
        let f = fleet();
        let mut c = collector(&f);
        c.record(&tx(0, 0, Some(0), 0.0, 441));
        c.record(&tx(50_000, 3, Some(0), 1_900.0, 441));
        c.record(&tx(90_000, 1, None, 500.0, 420)); // beacon, not attributed
        let run = c.finish(SimTime::from_secs(1));
        assert_eq!(run.messages[0].tx_count, 2);
        assert_eq!(run.total_tx, 3);
    }

    #[test]
    fn members_bin_at_generation_newcomers_at_reception() {
        let f = fleet();
        let mut c = collector(&f);
        // Member node 1 at x=500: bin (500+2000)/100 = 25.
        c.record(&delivered(1_000, 1, 0, 500.0));
        // Node 4 was outside at generation; it reports from x=1950 now.
        c.record(&delivered(2_000, 4, 0, 1_950.0));
        let run = c.finish(SimTime::from_secs(1));
        let m = &run.messages[0];
        assert_eq!(m.bin_expected[25], 1);
        assert_eq!(m.bin_received[25], 1);
        assert_eq!(m.bin_received[39], 1, "newcomer lands in the 1900m bin");
        assert_eq!(m.members_received, 1, "newcomer outside the ratio");
    }

    #[test]
    fn newcomer_still_outside_the_area_stays_invisible() {
        let f = fleet();
        let mut c = collector(&f);
        c.record(&delivered(2_000, 4, 0, 2_500.0));
        let run = c.finish(SimTime::from_secs(1));
        assert_eq!(run.messages[0].bin_received.iter().sum::<u32>(), 0);
    }

    #[test]
    fn pacing_audit_flags_early_transmissions() {
        let f = fleet();
        let mut c = collector(&f);
        c.record(&tx(0, 1, None, 500.0, 441));
        // 441us airtime + 25ms floor: anything before 25441us is a violation.
        c.record(&tx(20_000, 1, None, 500.0, 441));
        c.record(&tx(46_000, 1, None, 500.0, 441));
        let run = c.finish(SimTime::from_secs(1));
        assert_eq!(run.gap_violations, 1);
    }

    #[test]
    fn occupancy_is_airtime_over_horizon() {
        let f = fleet();
        let mut c = collector(&f);
        c.record(&tx(0, 1, None, 500.0, 30_000));
        let run = c.finish(SimTime::from_secs(1));
        assert!((run.max_occupancy - 0.03).abs() < 1e-12);
    }

    #[test]
    fn second_generation_rearm_is_a_violation_first_is_not() {
        let f = fleet();
        let mut r1_fleet = f.clone();
        r1_fleet.set_release_all(Release::R1);
        let mut c = collector(&r1_fleet);
        c.record(&arm(1_000, 1, 0));
        c.record(&arm(60_000, 1, 0));
        let run = c.finish(SimTime::from_secs(1));
        assert_eq!(run.rearm_violations, 0, "re-arming nodes may re-arm");
        assert_eq!(run.dpl_eviction_rearms, 0);

        let mut r2_fleet = f.clone();
        r2_fleet.set_release_all(Release::R2);
        let mut c = collector(&r2_fleet);
        c.record(&arm(1_000, 1, 0));
        c.record(&arm(60_000, 1, 0));
        let run = c.finish(SimTime::from_secs(1));
        assert_eq!(run.rearm_violations, 1, "list still held the identifier");
        assert_eq!(run.dpl_eviction_rearms, 0);
    }

    #[test]
    fn rearm_after_list_capacity_fresh_messages_is_aging_not_violation() {
        let mut f = fleet();
        f.set_release_all(Release::R2);
        let mut c = collector(&f);
        c.record(&arm(1_000, 1, 0));
        // 32 fresher messages each armed once push sn 0 out of a 32-entry
        // FIFO at node 1.
        for sn in 1..=32u16 {
            c.register_message(key(sn), SimTime::from_millis(sn as u64), SimDur::from_secs(10), &f);
            c.record(&arm(2_000 + sn as u64, 1, sn));
        }
        c.record(&arm(90_000, 1, 0));
        let run = c.finish(SimTime::from_secs(1));
        assert_eq!(run.rearm_violations, 0, "identifier already aged out");
        assert_eq!(run.dpl_eviction_rearms, 1);

        // One insert short of capacity: the list still remembers.
        let mut c = collector(&f);
        c.record(&arm(1_000, 1, 0));
        for sn in 1..=31u16 {
            c.register_message(key(sn), SimTime::from_millis(sn as u64), SimDur::from_secs(10), &f);
            c.record(&arm(2_000 + sn as u64, 1, sn));
        }
        c.record(&arm(90_000, 1, 0));
        let run = c.finish(SimTime::from_secs(1));
        assert_eq!(run.rearm_violations, 1);
        assert_eq!(run.dpl_eviction_rearms, 0);
    }

    #[test]
    fn only_window_messages_are_reported() {
        let f = fleet();
        let mut c = MetricsCollector::new(
            &f,
            0.5,
            1,
            SimTime::from_secs(10),
            SimTime::from_secs(20),
            SimDur::from_millis(25),
            32,
        );
        c.register_message(key(0), SimTime::from_secs(9), SimDur::from_secs(10), &f);
        c.register_message(key(1), SimTime::from_secs(10), SimDur::from_secs(10), &f);
        c.register_message(key(2), SimTime::from_secs(19), SimDur::from_secs(10), &f);
        c.register_message(key(3), SimTime::from_secs(20), SimDur::from_secs(10), &f);
        let run = c.finish(SimTime::from_secs(31));
        let sns: Vec<u16> = run.messages.iter().map(|m| m.sn).collect();
        assert_eq!(sns, vec![1, 2]);
    }

    fn tiny_run(pen: f64, seed: u64, tx_counts: &[u64], pdrs: &[f64]) -> RunMetrics {
        let messages = tx_counts
            .iter()
            .zip(pdrs)
            .enumerate()
            .map(|(i, (&t, &p))| MessageReport {
                sn: i as u16,
                gen_at: SimTime::from_secs(i as u64),
                tx_count: t,
                members: 100,
                members_received: (p * 100.0) as u32,
                pdr: p,
                bin_expected: {
                    let mut b = [0; NUM_BINS];
                    b[20] = 10;
                    b
                },
                bin_received: {
                    let mut b = [0; NUM_BINS];
                    b[20] = (p * 10.0) as u32;
                    b
                },
            })
            .collect();
        RunMetrics {
            penetration: pen,
            seed,
            messages,
            gap_violations: 0,
            rearm_violations: 0,
            dpl_eviction_rearms: 0,
            max_occupancy: 0.01,
            total_tx: tx_counts.iter().sum(),
            total_collisions: 0,
            total_queue_drops: 0,
            bin_width_m: 100.0,
            area_half_length: 2_000.0,
        }
    }

    #[test]
    fn csv_output_is_byte_exact() {
        let sweep = SweepResults {
            runs: vec![
                tiny_run(0.25, 2, &[40], &[0.9]),
                tiny_run(0.0, 1, &[100, 110], &[1.0, 0.95]),
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        sweep.write_csvs(dir.path()).unwrap();

        let tx = fs::read_to_string(dir.path().join("transmissions.csv")).unwrap();
        assert_eq!(
            tx,
            "penetration,seed,message,tx_count\n0,1,0,100\n0,1,1,110\n0.25,2,0,40\n"
        );
        let pdr = fs::read_to_string(dir.path().join("pdr.csv")).unwrap();
        assert_eq!(
            pdr,
            "penetration,seed,message,pdr\n0,1,0,1.000000\n0,1,1,0.950000\n0.25,2,0,0.900000\n"
        );
        let dist = fs::read_to_string(dir.path().join("pdr_distance.csv")).unwrap();
        assert_eq!(
            dist,
            "penetration,distance_bin_m,mean_pdr\n0,0,0.950000\n0.25,0,0.900000\n"
        );
        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(
            summary,
            "penetration,mean_tx,mean_pdr,ratio_vs_0pct\n\
             0,105.000000,0.975000,1.000000\n\
             0.25,40.000000,0.900000,2.625000\n"
        );
    }

    #[test]
    fn summary_ratio_blank_without_a_baseline() {
        let sweep = SweepResults {
            runs: vec![tiny_run(0.5, 1, &[40], &[0.9])],
        };
        let dir = tempfile::tempdir().unwrap();
        sweep.write_csvs(dir.path()).unwrap();
        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(
            summary,
            "penetration,mean_tx,mean_pdr,ratio_vs_0pct\n0.5,40.000000,0.900000,\n"
        );
    }
}
