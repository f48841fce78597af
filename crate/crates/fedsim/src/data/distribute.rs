//! The four distribution strategies that carve a dataset into client shares.
//!
//! Every distributor is a pure, seeded function from a [`DataContainer`] to a
//! [`DistributionPlan`]: disjoint per-client index lists plus the derived
//! client-by-label histogram.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::data::DataContainer;
use crate::error::{FedError, Result};
use crate::seeding;

/// Assignment of source records to clients.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionPlan {
    assignments: Vec<Vec<usize>>,
    label_histogram: Vec<Vec<usize>>,
    num_classes: usize,
    /// Records the Dirichlet distributor moved to another label because the
    /// drawn label's supply was exhausted. Zero for the other strategies.
    reassigned: usize,
}

impl DistributionPlan {
    fn build(assignments: Vec<Vec<usize>>, data: &DataContainer, reassigned: usize) -> Self {
        let num_classes = data.num_classes();
        let label_histogram = assignments
            .iter()
            .map(|indices| {
                let mut row = vec![0usize; num_classes];
                for &i in indices {
                    row[data.label(i)] += 1;
                }
                row
            })
            .collect();
        Self {
            assignments,
            label_histogram,
            num_classes,
            reassigned,
        }
    }

    pub fn num_clients(&self) -> usize {
        self.assignments.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn client_indices(&self, client: usize) -> &[usize] {
        &self.assignments[client]
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assignments
    }

    pub fn label_histogram(&self) -> &[Vec<usize>] {
        &self.label_histogram
    }

    pub fn reassigned(&self) -> usize {
        self.reassigned
    }

    /// Distinct labels held by one client.
    pub fn distinct_labels(&self, client: usize) -> usize {
        self.label_histogram[client].iter().filter(|&&c| c > 0).count()
    }

    /// Checks the plan against its source container: pairwise-disjoint index
    /// lists, all indices in bounds, and a histogram that matches the actual
    /// label counts.
    pub fn validate(&self, data: &DataContainer) -> Result<()> {
        let mut seen = vec![false; data.len()];
        for (client, indices) in self.assignments.iter().enumerate() {
            let mut row = vec![0usize; self.num_classes];
            for &i in indices {
                if i >= data.len() {
                    return Err(FedError::Argument(format!(
                        "client {client}: index {i} out of bounds for {} records",
                        data.len()
                    )));
                }
                if seen[i] {
                    return Err(FedError::Argument(format!(
                        "record {i} assigned to more than one client"
                    )));
                }
                seen[i] = true;
                row[data.label(i)] += 1;
            }
            if row != self.label_histogram[client] {
                return Err(FedError::Argument(format!(
                    "client {client}: histogram row does not match assignments"
                )));
            }
        }
        Ok(())
    }

    /// Renders the client-by-label histogram as CSV: a header of label ids,
    /// then one row of counts per client.
    pub fn export_heatmap(&self) -> String {
        let mut out = String::new();
        for c in 0..self.num_classes {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&format!("label_{c}"));
        }
        out.push('\n');
        for row in &self.label_histogram {
            let mut first = true;
            for count in row {
                if !first {
                    out.push(',');
                }
                first = false;
                out.push_str(&count.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Record indices grouped by label, ascending within each label.
fn indices_by_label(data: &DataContainer) -> Vec<Vec<usize>> {
    let mut by_label = vec![Vec::new(); data.num_classes()];
    for i in 0..data.len() {
        by_label[data.label(i)].push(i);
    }
    by_label
}

/// Per-label pools in seeded random order, consumed front to back.
struct LabelPools {
    pools: Vec<Vec<usize>>,
    cursors: Vec<usize>,
}

impl LabelPools {
    fn new(data: &DataContainer, rng: &mut ChaCha8Rng) -> Self {
        let mut pools = indices_by_label(data);
        for pool in &mut pools {
            pool.shuffle(rng);
        }
        let cursors = vec![0; pools.len()];
        Self { pools, cursors }
    }

    fn remaining(&self, label: usize) -> usize {
        self.pools[label].len() - self.cursors[label]
    }

    fn take(&mut self, label: usize, n: usize) -> &[usize] {
        let start = self.cursors[label];
        self.cursors[label] += n;
        &self.pools[label][start..start + n]
    }
}

/// Splits each label's records into consecutive shards of exactly
/// `shard_size` (per-label remainders dropped), shuffles the shards, and
/// deals `shards_per_client` to each client. The client count is
/// `total_shards / shards_per_client`; each client ends up with at most
/// `shards_per_client` distinct labels.
pub fn distribute_shard(
    data: &DataContainer,
    shard_size: usize,
    shards_per_client: usize,
    seed: u64,
) -> Result<DistributionPlan> {
    if shard_size == 0 || shards_per_client == 0 {
        return Err(FedError::Argument(
            "shard_size and shards_per_client must be positive".into(),
        ));
    }
    let mut shards: Vec<&[usize]> = Vec::new();
    let by_label = indices_by_label(data);
    for pool in &by_label {
        for shard in pool.chunks_exact(shard_size) {
            shards.push(shard);
        }
    }
    if shards.len() < shards_per_client {
        return Err(FedError::InsufficientData(format!(
            "{} shards of size {shard_size} cannot serve {shards_per_client} shards per client",
            shards.len()
        )));
    }
    let mut rng = seeding::rng_from(seed);
    shards.shuffle(&mut rng);
    let num_clients = shards.len() / shards_per_client;
    let assignments: Vec<Vec<usize>> = (0..num_clients)
        .map(|k| {
            shards[k * shards_per_client..(k + 1) * shards_per_client]
                .iter()
                .flat_map(|shard| shard.iter().copied())
                .collect()
        })
        .collect();
    Ok(DistributionPlan::build(assignments, data, 0))
}

/// Gives each of `num_clients` clients exactly `labels_per_client` distinct
/// labels and `records_per_client` records split as evenly as possible across
/// those labels. Labels are dealt round-robin from a seeded shuffled cycle so
/// demand spreads evenly; records are never reused across clients.
pub fn distribute_label(
    data: &DataContainer,
    labels_per_client: usize,
    records_per_client: usize,
    num_clients: usize,
    seed: u64,
) -> Result<DistributionPlan> {
    let num_classes = data.num_classes();
    if labels_per_client == 0 || records_per_client == 0 || num_clients == 0 {
        return Err(FedError::Argument(
            "labels_per_client, records_per_client and num_clients must be positive".into(),
        ));
    }
    if labels_per_client > num_classes {
        return Err(FedError::Argument(format!(
            "labels_per_client {labels_per_client} exceeds {num_classes} classes"
        )));
    }
    let mut rng = seeding::rng_from(seed);
    let mut label_cycle: Vec<usize> = (0..num_classes).collect();
    label_cycle.shuffle(&mut rng);
    let mut pools = LabelPools::new(data, &mut rng);

    let base = records_per_client / labels_per_client;
    let extra = records_per_client % labels_per_client;
    let mut cursor = 0usize;
    let mut assignments = Vec::with_capacity(num_clients);
    for _ in 0..num_clients {
        let mut indices = Vec::with_capacity(records_per_client);
        for slot in 0..labels_per_client {
            let label = label_cycle[cursor % num_classes];
            cursor += 1;
            let need = base + usize::from(slot < extra);
            if pools.remaining(label) < need {
                return Err(FedError::InsufficientData(format!(
                    "label {label}: need {need} more records, only {} left",
                    pools.remaining(label)
                )));
            }
            indices.extend_from_slice(pools.take(label, need));
        }
        assignments.push(indices);
    }
    Ok(DistributionPlan::build(assignments, data, 0))
}

/// One client per label: client `k` holds records of label `k` only, so
/// label sets across clients are pairwise disjoint. `records_per_client` of
/// `None` assigns every record of the label; `Some(n)` draws a seeded sample
/// of `n`.
pub fn distribute_unique(
    data: &DataContainer,
    records_per_client: Option<usize>,
    seed: u64,
) -> Result<DistributionPlan> {
    let mut rng = seeding::rng_from(seed);
    let by_label = indices_by_label(data);
    let mut assignments = Vec::with_capacity(by_label.len());
    for (label, pool) in by_label.into_iter().enumerate() {
        match records_per_client {
            None => {
                if pool.is_empty() {
                    return Err(FedError::InsufficientData(format!(
                        "label {label} has no records"
                    )));
                }
                assignments.push(pool);
            }
            Some(n) => {
                if pool.len() < n {
                    return Err(FedError::InsufficientData(format!(
                        "label {label}: requested {n} records, only {} available",
                        pool.len()
                    )));
                }
                let mut pool = pool;
                pool.shuffle(&mut rng);
                pool.truncate(n);
                assignments.push(pool);
            }
        }
    }
    Ok(DistributionPlan::build(assignments, data, 0))
}

/// Draws a symmetric `Dirichlet(alpha)` label-proportion vector per client,
/// rounds it to integer counts by largest remainder, and fills each client
/// with `records_per_client` records. When a drawn label's supply runs out,
/// the deficit moves to the label with the most records left (counted in
/// [`DistributionPlan::reassigned`]).
pub fn distribute_dirichlet(
    data: &DataContainer,
    alpha: f64,
    num_clients: usize,
    records_per_client: usize,
    seed: u64,
) -> Result<DistributionPlan> {
    if !(alpha > 0.0) {
        return Err(FedError::Argument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if num_clients == 0 || records_per_client == 0 {
        return Err(FedError::Argument(
            "num_clients and records_per_client must be positive".into(),
        ));
    }
    let demand = num_clients * records_per_client;
    if demand > data.len() {
        return Err(FedError::InsufficientData(format!(
            "{num_clients} clients x {records_per_client} records = {demand} exceeds {} available",
            data.len()
        )));
    }
    let num_classes = data.num_classes();
    let mut rng = seeding::rng_from(seed);
    let mut pools = LabelPools::new(data, &mut rng);

    let mut reassigned = 0usize;
    let mut assignments = Vec::with_capacity(num_clients);
    for _ in 0..num_clients {
        let proportions = dirichlet_proportions(&mut rng, alpha, num_classes);
        let targets = largest_remainder(&proportions, records_per_client);
        // Clip to supply, then push any deficit onto the best-stocked label.
        let mut counts = vec![0usize; num_classes];
        let mut deficit = 0usize;
        for (label, &want) in targets.iter().enumerate() {
            let got = want.min(pools.remaining(label));
            counts[label] = got;
            deficit += want - got;
        }
        reassigned += deficit;
        while deficit > 0 {
            let label = (0..num_classes)
                .max_by_key(|&c| (pools.remaining(c) - counts[c], std::cmp::Reverse(c)))
                .expect("num_classes > 0");
            let free = pools.remaining(label) - counts[label];
            let move_here = deficit.min(free);
            if move_here == 0 {
                return Err(FedError::InsufficientData(
                    "label supply exhausted while rebalancing".into(),
                ));
            }
            counts[label] += move_here;
            deficit -= move_here;
        }
        let mut indices = Vec::with_capacity(records_per_client);
        for (label, &count) in counts.iter().enumerate() {
            if count > 0 {
                indices.extend_from_slice(pools.take(label, count));
            }
        }
        assignments.push(indices);
    }
    Ok(DistributionPlan::build(assignments, data, reassigned))
}

/// Sample from a symmetric Dirichlet by normalizing Gamma(alpha, 1) draws.
fn dirichlet_proportions(rng: &mut ChaCha8Rng, alpha: f64, num_classes: usize) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated positive");
    let mut draws: Vec<f64> = (0..num_classes).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 {
        for d in &mut draws {
            *d /= total;
        }
    } else {
        // All draws underflowed (tiny alpha): fall back to a single random
        // label taking everything, the distribution's own limit behaviour.
        let hot = rng.random_range(0..num_classes);
        for (c, d) in draws.iter_mut().enumerate() {
            *d = if c == hot { 1.0 } else { 0.0 };
        }
    }
    draws
}

/// Largest-remainder rounding of `proportions * total` to integers summing to
/// `total`. Ties between remainders break toward the lower index.
fn largest_remainder(proportions: &[f64], total: usize) -> Vec<usize> {
    let raw: Vec<f64> = proportions.iter().map(|p| p * total as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|&r| r.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..proportions.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &c in order.iter().take(total - assigned) {
        counts[c] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic;

    /// Labels-only container: `per_class` records for each of `classes`.
    fn labeled(classes: usize, per_class: usize) -> DataContainer {
        let n = classes * per_class;
        let labels: Vec<usize> = (0..n).map(|i| i / per_class).collect();
        DataContainer::new(vec![0.0; n], 1, labels, classes).unwrap()
    }

    #[test]
    fn shard_reproduces_mnist_arithmetic() {
        let data = labeled(10, 6000); // 60k records
        let plan = distribute_shard(&data, 300, 2, 0).unwrap();
        assert_eq!(plan.num_clients(), 100);
        assert!(plan.assignments().iter().all(|a| a.len() == 600));
        let plan5 = distribute_shard(&data, 300, 5, 0).unwrap();
        assert_eq!(plan5.num_clients(), 40);
        plan.validate(&data).unwrap();
        plan5.validate(&data).unwrap();
    }

    #[test]
    fn shard_caps_distinct_labels() {
        let data = labeled(10, 600);
        let plan = distribute_shard(&data, 100, 2, 7).unwrap();
        for k in 0..plan.num_clients() {
            assert!(plan.distinct_labels(k) <= 2);
            assert_eq!(plan.client_indices(k).len(), 200);
        }
    }

    #[test]
    fn shard_single_label_trivial() {
        let data = labeled(1, 10);
        let plan = distribute_shard(&data, 10, 1, 3).unwrap();
        assert_eq!(plan.num_clients(), 1);
        assert_eq!(plan.client_indices(0).len(), 10);
    }

    #[test]
    fn shard_discards_per_label_remainder() {
        let data = labeled(2, 7); // 7 per label, shard 3 -> 2 shards/label
        let plan = distribute_shard(&data, 3, 1, 0).unwrap();
        assert_eq!(plan.num_clients(), 4);
        let assigned: usize = plan.assignments().iter().map(Vec::len).sum();
        assert_eq!(assigned, 12);
    }

    #[test]
    fn shard_insufficient() {
        let data = labeled(1, 10);
        let err = distribute_shard(&data, 10, 2, 0).unwrap_err();
        assert!(matches!(err, FedError::InsufficientData(_)));
    }

    #[test]
    fn label_iid_heatmap_is_flat() {
        let data = labeled(10, 1500);
        let plan = distribute_label(&data, 10, 600, 20, 0).unwrap();
        plan.validate(&data).unwrap();
        for row in plan.label_histogram() {
            assert!(row.iter().all(|&c| c == 60), "{row:?}");
        }
    }

    #[test]
    fn label_single_label_heatmap_is_one_hot() {
        let data = labeled(10, 1500);
        let plan = distribute_label(&data, 1, 600, 20, 0).unwrap();
        plan.validate(&data).unwrap();
        for row in plan.label_histogram() {
            let nonzero: Vec<&usize> = row.iter().filter(|&&c| c > 0).collect();
            assert_eq!(nonzero, vec![&600]);
        }
    }

    #[test]
    fn label_exact_distinct_count() {
        let data = labeled(10, 800);
        for l in [2usize, 3, 7] {
            let plan = distribute_label(&data, l, 120, 15, 11).unwrap();
            for k in 0..plan.num_clients() {
                assert_eq!(plan.distinct_labels(k), l);
                assert_eq!(plan.client_indices(k).len(), 120);
            }
        }
    }

    #[test]
    fn label_whole_class_to_one_client() {
        let data = labeled(3, 40);
        let plan = distribute_label(&data, 1, 40, 1, 5).unwrap();
        assert_eq!(plan.num_clients(), 1);
        assert_eq!(plan.client_indices(0).len(), 40);
        assert_eq!(plan.distinct_labels(0), 1);
    }

    #[test]
    fn label_insufficient_names_label() {
        let data = labeled(2, 10);
        let err = distribute_label(&data, 1, 15, 2, 0).unwrap_err();
        match err {
            FedError::InsufficientData(msg) => assert!(msg.contains("label"), "{msg}"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unique_one_client_per_label() {
        let data = labeled(10, 50);
        let plan = distribute_unique(&data, None, 0).unwrap();
        plan.validate(&data).unwrap();
        assert_eq!(plan.num_clients(), 10);
        for (k, row) in plan.label_histogram().iter().enumerate() {
            for (c, &count) in row.iter().enumerate() {
                assert_eq!(count > 0, c == k);
            }
        }
    }

    #[test]
    fn unique_label_sets_disjoint() {
        let data = labeled(4, 5);
        let plan = distribute_unique(&data, None, 0).unwrap();
        for i in 0..plan.num_clients() {
            for j in 0..plan.num_clients() {
                if i != j {
                    let overlap = plan.label_histogram()[i]
                        .iter()
                        .zip(&plan.label_histogram()[j])
                        .any(|(&a, &b)| a > 0 && b > 0);
                    assert!(!overlap);
                }
            }
        }
    }

    #[test]
    fn unique_full_label_when_unbounded() {
        let data = labeled(2, 5);
        let plan = distribute_unique(&data, None, 9).unwrap();
        assert_eq!(plan.client_indices(0).len(), 5);
        assert_eq!(plan.client_indices(1).len(), 5);
    }

    #[test]
    fn unique_sample_and_supply_error() {
        let data = labeled(2, 5);
        let plan = distribute_unique(&data, Some(3), 1).unwrap();
        assert!(plan.assignments().iter().all(|a| a.len() == 3));
        assert!(matches!(
            distribute_unique(&data, Some(6), 1),
            Err(FedError::InsufficientData(_))
        ));
    }

    #[test]
    fn dirichlet_fills_every_client() {
        let data = labeled(10, 1500);
        let plan = distribute_dirichlet(&data, 0.5, 20, 600, 3).unwrap();
        plan.validate(&data).unwrap();
        assert_eq!(plan.num_clients(), 20);
        assert!(plan.assignments().iter().all(|a| a.len() == 600));
    }

    #[test]
    fn dirichlet_rejects_excess_demand() {
        let data = labeled(10, 100);
        let err = distribute_dirichlet(&data, 1.0, 20, 600, 0).unwrap_err();
        assert!(matches!(err, FedError::InsufficientData(_)));
    }

    #[test]
    fn dirichlet_proportions_sum_to_one() {
        let mut rng = seeding::rng_from(4);
        for alpha in [0.1, 0.5, 1.0, 10.0] {
            let p = dirichlet_proportions(&mut rng, alpha, 10);
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "alpha {alpha}: sum {sum}");
            assert!(p.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn largest_remainder_sums_and_bounds() {
        let p = [0.305, 0.295, 0.25, 0.15];
        let counts = largest_remainder(&p, 601);
        assert_eq!(counts.iter().sum::<usize>(), 601);
        for (c, &count) in counts.iter().enumerate() {
            assert!((count as f64 - p[c] * 601.0).abs() <= 1.0);
        }
    }

    #[test]
    fn distributors_are_deterministic() {
        let data = generate_synthetic(5, 60, 3, 2);
        assert_eq!(
            distribute_shard(&data, 10, 2, 7).unwrap(),
            distribute_shard(&data, 10, 2, 7).unwrap()
        );
        assert_eq!(
            distribute_label(&data, 2, 30, 5, 7).unwrap(),
            distribute_label(&data, 2, 30, 5, 7).unwrap()
        );
        assert_eq!(
            distribute_unique(&data, Some(10), 7).unwrap(),
            distribute_unique(&data, Some(10), 7).unwrap()
        );
        assert_eq!(
            distribute_dirichlet(&data, 0.5, 4, 30, 7).unwrap(),
            distribute_dirichlet(&data, 0.5, 4, 30, 7).unwrap()
        );
    }

    #[test]
    fn heatmap_export() {
        let data = labeled(2, 4);
        let plan = distribute_unique(&data, None, 0).unwrap();
        let csv = plan.export_heatmap();
        assert_eq!(csv, "label_0,label_1\n4,0\n0,4\n");
        assert_eq!(csv, plan.export_heatmap());
    }

    #[test]
    fn heatmap_row_sums_match_client_sizes() {
        let data = labeled(5, 100);
        let plan = distribute_dirichlet(&data, 1.0, 4, 50, 5).unwrap();
        for (k, row) in plan.label_histogram().iter().enumerate() {
            assert_eq!(row.iter().sum::<usize>(), plan.client_indices(k).len());
        }
    }
}
