//! Cellular geometry, path gains and clustering-pattern catalogs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{substream, Stream};
use crate::{Error, Result};

/// Distance floor (meters) below which path loss is not evaluated.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Largest network for which exhaustive pattern enumeration is attempted.
pub const EXHAUSTIVE_MAX_CELLS: usize = 10;

/// Urban macrocell path loss in dB, `34.5 + 35 log10(r)`, with `r` clamped
/// to [`MIN_DISTANCE_M`].
pub fn path_loss_db(distance_m: f64) -> f64 {
    34.5 + 35.0 * distance_m.max(MIN_DISTANCE_M).log10()
}

/// Linear power gain for a path loss in dB.
pub fn db_to_gain(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axial coordinates of a cell on the hexagonal lattice.
pub type Axial = (i32, i32);

const AXIAL_DIRECTIONS: [Axial; 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];

/// Base stations, mobiles and the large-scale gains between them.
///
/// Users are indexed `b * users_per_cell + k`. Path gains are stored
/// user-major: entry `u * num_cells + b` is the gain from BS `b` to user `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub num_cells: usize,
    pub users_per_cell: usize,
    pub antennas: usize,
    pub cell_radius: f64,
    pub bs_positions: Vec<Point>,
    /// Lattice coordinates; absent for synthetic topologies.
    pub bs_axial: Option<Vec<Axial>>,
    pub ms_positions: Vec<Point>,
    pub path_gains: Vec<f64>,
    /// Multiplier applied to every path gain when channels are drawn.
    /// Expresses transmit power in a chosen reference unit relative to noise.
    pub gain_scale: f64,
    pub neighbors: Vec<Vec<usize>>,
}

impl NetworkTopology {
    pub fn num_users(&self) -> usize {
        self.num_cells * self.users_per_cell
    }

    pub fn path_gain(&self, user: usize, bs: usize) -> f64 {
        self.path_gains[user * self.num_cells + bs]
    }

    /// Path gain times [`Self::gain_scale`].
    pub fn effective_gain(&self, user: usize, bs: usize) -> f64 {
        self.path_gain(user, bs) * self.gain_scale
    }

    pub fn serving_cell(&self, user: usize) -> usize {
        user / self.users_per_cell
    }

    pub fn users_of(&self, bs: usize) -> std::ops::Range<usize> {
        bs * self.users_per_cell..(bs + 1) * self.users_per_cell
    }

    pub fn are_neighbors(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].contains(&b)
    }

    /// Returns a copy with a different [`Self::gain_scale`].
    pub fn with_gain_scale(&self, scale: f64) -> Self {
        let mut t = self.clone();
        t.gain_scale = scale;
        t
    }

    /// Builds a topology from explicit path gains (`gains[user][bs]`).
    /// Base stations are placed on a line, each mobile at its serving BS.
    pub fn from_path_gains(
        users_per_cell: usize,
        antennas: usize,
        gains: &[Vec<f64>],
        neighbors: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let num_users = gains.len();
        if users_per_cell == 0 || num_users % users_per_cell != 0 {
            return Err(Error::config("gain rows must be a multiple of users_per_cell"));
        }
        let num_cells = num_users / users_per_cell;
        if gains.iter().any(|row| row.len() != num_cells) {
            return Err(Error::config("every gain row needs one entry per BS"));
        }
        let bs_positions: Vec<Point> = (0..num_cells)
            .map(|b| Point {
                x: b as f64,
                y: 0.0,
            })
            .collect();
        let ms_positions = (0..num_users)
            .map(|u| bs_positions[u / users_per_cell])
            .collect();
        let topo = NetworkTopology {
            num_cells,
            users_per_cell,
            antennas,
            cell_radius: 1.0,
            bs_positions,
            bs_axial: None,
            ms_positions,
            path_gains: gains.iter().flatten().copied().collect(),
            gain_scale: 1.0,
            neighbors,
        };
        topo.validate()?;
        Ok(topo)
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas < self.users_per_cell {
            return Err(Error::config(format!(
                "antennas ({}) must be at least users_per_cell ({})",
                self.antennas, self.users_per_cell
            )));
        }
        if self.num_cells == 0 || self.users_per_cell == 0 {
            return Err(Error::config("topology needs at least one cell and one user"));
        }
        if self.path_gains.len() != self.num_users() * self.num_cells
            || self.ms_positions.len() != self.num_users()
            || self.bs_positions.len() != self.num_cells
            || self.neighbors.len() != self.num_cells
        {
            return Err(Error::config("topology dimensions are inconsistent"));
        }
        if self.path_gains.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
            return Err(Error::config("path gains must be positive and finite"));
        }
        if !(self.gain_scale > 0.0) || !self.gain_scale.is_finite() {
            return Err(Error::config("gain scale must be positive"));
        }
        for (a, nbrs) in self.neighbors.iter().enumerate() {
            for &b in nbrs {
                if b >= self.num_cells || b == a || !self.neighbors[b].contains(&a) {
                    return Err(Error::config("neighbor graph must be symmetric and loop-free"));
                }
            }
        }
        for u in 0..self.num_users() {
            let d = self.ms_positions[u].distance(&self.bs_positions[self.serving_cell(u)]);
            if d > self.cell_radius * (1.0 + 1e-9) {
                return Err(Error::config(format!("user {u} lies outside its cell")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let topo: NetworkTopology = serde_json::from_str(text)?;
        topo.validate()?;
        Ok(topo)
    }
}

/// Axial coordinates of all cells within `num_rings` of the origin; center
/// first, then ring by ring.
pub fn hex_cells(num_rings: usize) -> Vec<Axial> {
    let mut cells = vec![(0, 0)];
    for ring in 1..=num_rings as i32 {
        let (dq, dr) = AXIAL_DIRECTIONS[4];
        let mut cur = (dq * ring, dr * ring);
        for dir in AXIAL_DIRECTIONS {
            for _ in 0..ring {
                cells.push(cur);
                cur = (cur.0 + dir.0, cur.1 + dir.1);
            }
        }
    }
    cells
}

fn axial_to_point(a: Axial, isd: f64) -> Point {
    Point {
        x: isd * (a.0 as f64 + a.1 as f64 / 2.0),
        y: isd * (3f64.sqrt() / 2.0) * a.1 as f64,
    }
}

fn axial_distance(a: Axial, b: Axial) -> i32 {
    let dq = a.0 - b.0;
    let dr = a.1 - b.1;
    (dq.abs() + dr.abs() + (dq + dr).abs()) / 2
}

/// Inside the hexagonal cell of circumradius `radius` centred at the origin.
fn in_hexagon(x: f64, y: f64, radius: f64) -> bool {
    let apothem = radius * 3f64.sqrt() / 2.0;
    (0..3).all(|i| {
        let angle = std::f64::consts::FRAC_PI_3 * i as f64;
        (x * angle.cos() + y * angle.sin()).abs() <= apothem
    })
}

/// Hexagonal layout parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HexLayout {
    pub num_rings: usize,
    pub cell_radius: f64,
    pub users_per_cell: usize,
    pub antennas: usize,
    /// Mobiles are dropped uniformly in the cell shrunk by this factor.
    pub placement_fraction: f64,
    pub seed: u64,
}

impl HexLayout {
    pub fn build(&self) -> Result<NetworkTopology> {
        if self.antennas < self.users_per_cell {
            return Err(Error::config(format!(
                "antennas ({}) must be at least users_per_cell ({})",
                self.antennas, self.users_per_cell
            )));
        }
        if !(self.cell_radius > 0.0) {
            return Err(Error::config("cell radius must be positive"));
        }
        if !(self.placement_fraction > 0.0 && self.placement_fraction <= 1.0) {
            return Err(Error::config("placement fraction must lie in (0, 1]"));
        }
        if self.users_per_cell == 0 {
            return Err(Error::config("users_per_cell must be positive"));
        }
        let isd = 3f64.sqrt() * self.cell_radius;
        let axial = hex_cells(self.num_rings);
        let num_cells = axial.len();
        let bs_positions: Vec<Point> = axial.iter().map(|&a| axial_to_point(a, isd)).collect();
        let neighbors = (0..num_cells)
            .map(|a| {
                (0..num_cells)
                    .filter(|&b| axial_distance(axial[a], axial[b]) == 1)
                    .collect()
            })
            .collect();

        let reach = self.cell_radius * self.placement_fraction;
        let num_users = num_cells * self.users_per_cell;
        let ms_positions: Vec<Point> = (0..num_users)
            .map(|u| {
                let centre = bs_positions[u / self.users_per_cell];
                let mut rng = substream(self.seed, Stream::Placement, u as u64);
                loop {
                    let x = rng.random_range(-reach..=reach);
                    let y = rng.random_range(-reach..=reach);
                    if in_hexagon(x, y, reach) {
                        break Point {
                            x: centre.x + x,
                            y: centre.y + y,
                        };
                    }
                }
            })
            .collect();

        let mut path_gains = Vec::with_capacity(num_users * num_cells);
        for ms in &ms_positions {
            for bs in &bs_positions {
                path_gains.push(db_to_gain(path_loss_db(ms.distance(bs))));
            }
        }
        let topo = NetworkTopology {
            num_cells,
            users_per_cell: self.users_per_cell,
            antennas: self.antennas,
            cell_radius: self.cell_radius,
            bs_positions,
            bs_axial: Some(axial),
            ms_positions,
            path_gains,
            gain_scale: 1.0,
            neighbors,
        };
        topo.validate()?;
        Ok(topo)
    }
}

/// Hexagonal topology with mobiles dropped over the whole cell.
pub fn build_hex_topology(
    num_rings: usize,
    cell_radius: f64,
    users_per_cell: usize,
    antennas: usize,
    rng_seed: u64,
) -> Result<NetworkTopology> {
    HexLayout {
        num_rings,
        cell_radius,
        users_per_cell,
        antennas,
        placement_fraction: 1.0,
        seed: rng_seed,
    }
    .build()
}

/// A partition of the BS set into connected clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusteringPattern {
    /// Sorted BS sets, ordered by their smallest member.
    pub clusters: Vec<Vec<usize>>,
    /// Index into the catalog, if the pattern belongs to one.
    pub pattern_id: Option<usize>,
}

impl ClusteringPattern {
    pub fn new(clusters: Vec<Vec<usize>>) -> Self {
        ClusteringPattern {
            clusters: canonical(clusters),
            pattern_id: None,
        }
    }

    pub fn singletons(num_cells: usize) -> Self {
        Self::new((0..num_cells).map(|b| vec![b]).collect())
    }

    pub fn global(num_cells: usize) -> Self {
        Self::new(vec![(0..num_cells).collect()])
    }

    /// Cluster index of every BS.
    pub fn cluster_of_bs(&self, num_cells: usize) -> Vec<usize> {
        let mut owner = vec![usize::MAX; num_cells];
        for (n, c) in self.clusters.iter().enumerate() {
            for &b in c {
                owner[b] = n;
            }
        }
        owner
    }

    /// Checks disjointness, coverage, size and connectivity.
    pub fn validate(&self, topo: &NetworkTopology, max_cluster_size: usize) -> Result<()> {
        let mut seen = vec![false; topo.num_cells];
        for c in &self.clusters {
            if c.is_empty() || c.len() > max_cluster_size {
                return Err(Error::config(format!("cluster {c:?} has invalid size")));
            }
            for &b in c {
                if b >= topo.num_cells || seen[b] {
                    return Err(Error::config(format!("cluster {c:?} overlaps or is out of range")));
                }
                seen[b] = true;
            }
            if !is_connected(c, &topo.neighbors) {
                return Err(Error::config(format!("cluster {c:?} is not connected")));
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::config("pattern does not cover every BS"));
        }
        Ok(())
    }
}

fn canonical(mut clusters: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for c in clusters.iter_mut() {
        c.sort_unstable();
        c.dedup();
    }
    clusters.retain(|c| !c.is_empty());
    clusters.sort();
    clusters
}

/// True when `set` induces a connected subgraph.
pub fn is_connected(set: &[usize], neighbors: &[Vec<usize>]) -> bool {
    let Some(&start) = set.first() else {
        return false;
    };
    let members: BTreeSet<usize> = set.iter().copied().collect();
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        for &w in &neighbors[v] {
            if members.contains(&w) && seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen.len() == members.len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CatalogMode {
    Exhaustive,
    Tiling,
}

/// Ordered list of clustering patterns plus the registry of distinct
/// clusters they use. Pattern 0 is always the all-singletons pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternCatalog {
    pub patterns: Vec<ClusteringPattern>,
    pub max_cluster_size: usize,
    /// Distinct clusters across all patterns, sorted.
    pub clusters: Vec<Vec<usize>>,
    /// `pattern_clusters[i][j]` is the registry index of cluster `j` of pattern `i`.
    pub pattern_clusters: Vec<Vec<usize>>,
}

impl PatternCatalog {
    /// Builds a catalog from explicit patterns. Duplicates are dropped and the
    /// all-singletons pattern is inserted first if missing.
    pub fn from_patterns(
        topo: &NetworkTopology,
        patterns: Vec<ClusteringPattern>,
        max_cluster_size: usize,
    ) -> Result<Self> {
        if max_cluster_size == 0 {
            return Err(Error::config("max cluster size must be at least 1"));
        }
        let singletons = ClusteringPattern::singletons(topo.num_cells);
        let mut ordered = vec![singletons];
        for p in patterns {
            let p = ClusteringPattern::new(p.clusters);
            if !ordered.iter().any(|q| q.clusters == p.clusters) {
                ordered.push(p);
            }
        }
        for (i, p) in ordered.iter_mut().enumerate() {
            p.validate(topo, max_cluster_size)?;
            p.pattern_id = Some(i);
        }
        let registry: BTreeSet<Vec<usize>> =
            ordered.iter().flat_map(|p| p.clusters.iter().cloned()).collect();
        let clusters: Vec<Vec<usize>> = registry.into_iter().collect();
        let index: HashMap<&Vec<usize>, usize> =
            clusters.iter().enumerate().map(|(i, c)| (c, i)).collect();
        let pattern_clusters = ordered
            .iter()
            .map(|p| p.clusters.iter().map(|c| index[c]).collect())
            .collect();
        Ok(PatternCatalog {
            patterns: ordered,
            max_cluster_size,
            clusters,
            pattern_clusters,
        })
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn cluster_id(&self, cluster: &[usize]) -> Option<usize> {
        self.clusters.binary_search_by(|c| c.as_slice().cmp(cluster)).ok()
    }

    /// Pattern id of an arbitrary partition, if it is in the catalog.
    pub fn find(&self, pattern: &ClusteringPattern) -> Option<usize> {
        self.patterns.iter().position(|p| p.clusters == pattern.clusters)
    }

    /// Pattern with the fewest clusters; ties go to the lowest id.
    pub fn most_cooperative(&self) -> &ClusteringPattern {
        self.patterns
            .iter()
            .min_by_key(|p| (p.clusters.len(), p.pattern_id))
            .expect("catalog is never empty")
    }
}

/// Builds the catalog of clustering patterns.
pub fn enumerate_patterns(
    topo: &NetworkTopology,
    max_cluster_size: usize,
    mode: CatalogMode,
) -> Result<PatternCatalog> {
    if max_cluster_size == 0 {
        return Err(Error::config("max cluster size must be at least 1"));
    }
    let patterns = match mode {
        CatalogMode::Exhaustive => exhaustive_patterns(topo, max_cluster_size)?,
        CatalogMode::Tiling => tiling_patterns(topo, max_cluster_size)?,
    };
    PatternCatalog::from_patterns(topo, patterns, max_cluster_size)
}

fn exhaustive_patterns(
    topo: &NetworkTopology,
    max_cluster_size: usize,
) -> Result<Vec<ClusteringPattern>> {
    if topo.num_cells > EXHAUSTIVE_MAX_CELLS {
        return Err(Error::Guard(format!(
            "exhaustive pattern enumeration refused for {} cells (limit {}); use tiling mode",
            topo.num_cells, EXHAUSTIVE_MAX_CELLS
        )));
    }
    fn recurse(
        next: usize,
        n: usize,
        max: usize,
        blocks: &mut Vec<Vec<usize>>,
        neighbors: &[Vec<usize>],
        out: &mut Vec<Vec<Vec<usize>>>,
    ) {
        if next == n {
            if blocks.iter().all(|b| is_connected(b, neighbors)) {
                out.push(blocks.clone());
            }
            return;
        }
        for i in 0..blocks.len() {
            if blocks[i].len() < max {
                blocks[i].push(next);
                recurse(next + 1, n, max, blocks, neighbors, out);
                blocks[i].pop();
            }
        }
        blocks.push(vec![next]);
        recurse(next + 1, n, max, blocks, neighbors, out);
        blocks.pop();
    }
    let mut raw = Vec::new();
    recurse(
        0,
        topo.num_cells,
        max_cluster_size,
        &mut Vec::new(),
        &topo.neighbors,
        &mut raw,
    );
    let mut patterns: Vec<ClusteringPattern> = raw.into_iter().map(ClusteringPattern::new).collect();
    patterns.sort_by(|a, b| {
        b.clusters
            .len()
            .cmp(&a.clusters.len())
            .then_with(|| a.clusters.cmp(&b.clusters))
    });
    Ok(patterns)
}

/// A tile shape on the lattice: offsets `t_j` with `class(t_j) = j`.
struct Tile {
    offsets: &'static [Axial],
    class: fn(Axial) -> i32,
}

const TILES: [Tile; 5] = [
    Tile {
        offsets: &[(0, 0), (1, 0)],
        class: |a| a.0,
    },
    Tile {
        offsets: &[(0, 0), (0, 1)],
        class: |a| a.1,
    },
    Tile {
        offsets: &[(0, 0), (1, -1)],
        class: |a| a.0,
    },
    Tile {
        offsets: &[(0, 0), (1, 0), (0, 1)],
        class: |a| a.0 - a.1,
    },
    Tile {
        offsets: &[(0, 0), (1, 0), (1, -1)],
        class: |a| a.0 - a.1,
    },
];

/// Shifted regular groupings of the lattice by dominoes (three directions)
/// and triangles (two orientations), truncated to the network.
fn tiling_patterns(topo: &NetworkTopology, max_cluster_size: usize) -> Result<Vec<ClusteringPattern>> {
    let Some(axial) = topo.bs_axial.as_ref() else {
        return Err(Error::config("tiling catalogs need a hexagonal topology"));
    };
    let mut patterns = Vec::new();
    for tile in TILES.iter().filter(|t| t.offsets.len() <= max_cluster_size) {
        let m = tile.offsets.len() as i32;
        for shift in 0..m {
            let mut groups: BTreeMap<Axial, Vec<usize>> = BTreeMap::new();
            for (b, &cell) in axial.iter().enumerate() {
                let j = ((tile.class)(cell) - shift).rem_euclid(m) as usize;
                let t = tile.offsets[j];
                let anchor = (cell.0 - t.0, cell.1 - t.1);
                groups.entry(anchor).or_default().push(b);
            }
            patterns.push(ClusteringPattern::new(groups.into_values().collect()));
        }
    }
    Ok(patterns)
}

/// Topology plus catalog, as exchanged on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyDocument {
    pub topology: NetworkTopology,
    pub catalog: PatternCatalog,
}

impl TopologyDocument {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let doc: TopologyDocument = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        doc.topology.validate()?;
        for p in &doc.catalog.patterns {
            p.validate(&doc.topology, doc.catalog.max_cluster_size)?;
        }
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph(n: usize) -> NetworkTopology {
        let gains = vec![vec![1.0; n]; n];
        let neighbors = (0..n)
            .map(|i| {
                let mut v = Vec::new();
                if i > 0 {
                    v.push(i - 1);
                }
                if i + 1 < n {
                    v.push(i + 1);
                }
                v
            })
            .collect();
        NetworkTopology::from_path_gains(1, 1, &gains, neighbors).unwrap()
    }

    #[test]
    fn ring_counts() {
        assert_eq!(build_hex_topology(2, 500.0, 1, 2, 1).unwrap().num_cells, 19);
        let one = build_hex_topology(0, 500.0, 1, 2, 1).unwrap();
        assert_eq!(one.num_cells, 1);
        assert!(one.neighbors[0].is_empty());
        let seven = build_hex_topology(1, 500.0, 1, 2, 1).unwrap();
        assert_eq!(seven.num_cells, 7);
        assert_eq!(seven.neighbors[0].len(), 6);
        assert!(seven.neighbors[1..].iter().all(|n| n.len() == 3));
    }

    #[test]
    fn antennas_below_users_is_rejected() {
        assert!(matches!(
            build_hex_topology(1, 500.0, 3, 2, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn path_loss_values() {
        assert!((path_loss_db(500.0) - 128.964).abs() < 1e-3);
        assert_eq!(path_loss_db(1.0), 34.5);
        assert!((path_loss_db(100.0) - 104.5).abs() < 1e-12);
        assert_eq!(path_loss_db(0.1), 34.5);
    }

    #[test]
    fn mobiles_inside_their_cells() {
        let t = HexLayout {
            num_rings: 2,
            cell_radius: 500.0,
            users_per_cell: 3,
            antennas: 4,
            placement_fraction: 1.0,
            seed: 11,
        }
        .build()
        .unwrap();
        for u in 0..t.num_users() {
            let d = t.ms_positions[u].distance(&t.bs_positions[t.serving_cell(u)]);
            assert!(d <= 500.0);
        }
    }

    #[test]
    fn exhaustive_two_cells() {
        let t = path_graph(2);
        let cat = enumerate_patterns(&t, 2, CatalogMode::Exhaustive).unwrap();
        assert_eq!(cat.len(), 2);
        assert_eq!(cat.patterns[0].clusters, vec![vec![0], vec![1]]);
        assert_eq!(cat.patterns[1].clusters, vec![vec![0, 1]]);
    }

    #[test]
    fn exhaustive_single_cell() {
        let t = path_graph(1);
        let cat = enumerate_patterns(&t, 3, CatalogMode::Exhaustive).unwrap();
        assert_eq!(cat.len(), 1);
        assert_eq!(cat.patterns[0].clusters, vec![vec![0]]);
    }

    #[test]
    fn exhaustive_path_excludes_disconnected() {
        let t = path_graph(3);
        let cat = enumerate_patterns(&t, 2, CatalogMode::Exhaustive).unwrap();
        let got: Vec<_> = cat.patterns.iter().map(|p| p.clusters.clone()).collect();
        assert_eq!(
            got,
            vec![
                vec![vec![0], vec![1], vec![2]],
                vec![vec![0], vec![1, 2]],
                vec![vec![0, 1], vec![2]],
            ]
        );
    }

    #[test]
    fn exhaustive_guard() {
        let t = build_hex_topology(2, 500.0, 1, 1, 0).unwrap();
        assert!(matches!(
            enumerate_patterns(&t, 3, CatalogMode::Exhaustive),
            Err(Error::Guard(_))
        ));
    }

    #[test]
    fn tiling_catalog_is_valid_for_nineteen_cells() {
        let t = build_hex_topology(2, 500.0, 1, 2, 0).unwrap();
        let cat = enumerate_patterns(&t, 3, CatalogMode::Tiling).unwrap();
        assert_eq!(cat.patterns[0].clusters.len(), 19);
        assert!(cat.len() > 6);
        for p in &cat.patterns {
            p.validate(&t, 3).unwrap();
        }
        let two = enumerate_patterns(&t, 2, CatalogMode::Tiling).unwrap();
        assert!(two.patterns.iter().all(|p| p.clusters.iter().all(|c| c.len() <= 2)));
    }

    #[test]
    fn json_round_trip() {
        let t = build_hex_topology(1, 500.0, 1, 2, 3).unwrap();
        let cat = enumerate_patterns(&t, 3, CatalogMode::Tiling).unwrap();
        let doc = TopologyDocument {
            topology: t.clone(),
            catalog: cat.clone(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("topo.json");
        doc.save(&path).unwrap();
        let back = TopologyDocument::load(&path).unwrap();
        assert_eq!(back.topology, t);
        assert_eq!(back.catalog, cat);
    }
}
