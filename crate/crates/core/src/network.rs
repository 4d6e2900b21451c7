//! Road network model and Manhattan grid generation.
//!
//! A generated grid has `rows × cols` signalized interior junctions named
//! `J_<row>_<col>` (row 0 is the northern edge) and one unsignalized
//! source/sink junction per boundary edge, named `N_<col>`, `S_<col>`,
//! `W_<row>` and `E_<row>`. Every orthogonal neighbor pair is joined by two
//! opposing directed links.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JunctionId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId(pub usize);

impl fmt::Display for JunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Compass side of a junction. Used both for the approach a link arrives
/// from and for the edge a boundary junction sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    North,
    East,
    South,
    West,
}

impl Side {
    /// Signal group of an approach from this side at a grid junction.
    pub fn index(self) -> usize {
        match self {
            Side::North => 0,
            Side::East => 1,
            Side::South => 2,
            Side::West => 3,
        }
    }

    pub fn is_horizontal(self) -> bool {
        matches!(self, Side::East | Side::West)
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::North => Side::South,
            Side::East => Side::West,
            Side::South => Side::North,
            Side::West => Side::East,
        }
    }
}

/// Maneuver count of a generated grid junction: one signal group per approach.
pub const GRID_MANEUVERS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    pub id: JunctionId,
    pub name: String,
    pub grid_pos: (i32, i32),
    pub signalized: bool,
    /// Number of signal groups (length of every phase color vector).
    pub maneuvers: usize,
    /// Boundary edge for grid source/sink junctions.
    pub boundary: Option<Side>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub name: String,
    pub from: JunctionId,
    pub to: JunctionId,
    /// Meters.
    pub length: f64,
    /// Whole steps needed to reach the stop line.
    pub free_flow_time: u32,
    /// Vehicles discharged per green step.
    pub capacity: u32,
    /// Index into the color vector of the downstream junction's plan.
    pub signal_group: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Route {
    links: Vec<LinkId>,
}

impl Route {
    /// Builds a route, checking that it is non-empty and contiguous in `net`.
    pub fn new(net: &RoadNetwork, links: Vec<LinkId>) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::Contract(
                "route must contain at least one link".into(),
            ));
        }
        for id in &links {
            net.link(*id)?;
        }
        for pair in links.windows(2) {
            let (a, b) = (net.link(pair[0])?, net.link(pair[1])?);
            if a.to != b.from {
                return Err(Error::Contract(format!(
                    "route is not contiguous between {} and {}",
                    a.name, b.name
                )));
            }
        }
        Ok(Route { links })
    }

    pub fn links(&self) -> &[LinkId] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadNetwork {
    junctions: Vec<Junction>,
    links: Vec<Link>,
    incoming: Vec<Vec<LinkId>>,
    outgoing: Vec<Vec<LinkId>>,
    #[serde(skip)]
    names: HashMap<String, JunctionId>,
    #[serde(skip)]
    link_names: HashMap<String, LinkId>,
}

/// Incremental construction of arbitrary networks.
#[derive(Debug, Default)]
pub struct NetworkBuilder {
    junctions: Vec<Junction>,
    links: Vec<Link>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn junction(
        &mut self,
        name: impl Into<String>,
        grid_pos: (i32, i32),
        signalized: bool,
        maneuvers: usize,
    ) -> JunctionId {
        let id = JunctionId(self.junctions.len());
        self.junctions.push(Junction {
            id,
            name: name.into(),
            grid_pos,
            signalized,
            maneuvers,
            boundary: None,
        });
        id
    }

    fn boundary_junction(&mut self, name: String, grid_pos: (i32, i32), side: Side) -> JunctionId {
        let id = self.junction(name, grid_pos, false, 0);
        self.junctions[id.0].boundary = Some(side);
        id
    }

    pub fn link(
        &mut self,
        from: JunctionId,
        to: JunctionId,
        length: f64,
        free_flow_time: u32,
        capacity: u32,
        signal_group: Option<usize>,
    ) -> LinkId {
        let id = LinkId(self.links.len());
        let name = match (self.junctions.get(from.0), self.junctions.get(to.0)) {
            (Some(a), Some(b)) => format!("{}>{}", a.name, b.name),
            _ => format!("L{}", id.0),
        };
        self.links.push(Link {
            id,
            name,
            from,
            to,
            length,
            free_flow_time,
            capacity,
            signal_group,
        });
        id
    }

    pub fn build(self) -> Result<RoadNetwork> {
        let n = self.junctions.len();
        let mut names = HashMap::new();
        for j in &self.junctions {
            if names.insert(j.name.clone(), j.id).is_some() {
                return Err(Error::Config(format!("duplicate junction name {}", j.name)));
            }
            if j.signalized && j.maneuvers == 0 {
                return Err(Error::Config(format!(
                    "signalized junction {} has no maneuvers",
                    j.name
                )));
            }
        }
        let mut incoming = vec![Vec::new(); n];
        let mut outgoing = vec![Vec::new(); n];
        let mut link_names = HashMap::new();
        for l in &self.links {
            if l.from.0 >= n || l.to.0 >= n {
                return Err(Error::Config(format!(
                    "link {} has a missing endpoint",
                    l.name
                )));
            }
            if l.from == l.to {
                return Err(Error::Config(format!("link {} is a self-loop", l.name)));
            }
            if !l.length.is_finite() || l.length <= 0.0 {
                return Err(Error::Config(format!(
                    "link {} must have positive length",
                    l.name
                )));
            }
            if l.free_flow_time < 1 {
                return Err(Error::Config(format!(
                    "link {} needs a free-flow time of at least one step",
                    l.name
                )));
            }
            if l.capacity < 1 {
                return Err(Error::Config(format!("link {} needs capacity ≥ 1", l.name)));
            }
            let to = &self.junctions[l.to.0];
            if to.signalized {
                match l.signal_group {
                    Some(g) if g < to.maneuvers => {}
                    _ => {
                        return Err(Error::Config(format!(
                            "link {} needs a signal group below {} at {}",
                            l.name, to.maneuvers, to.name
                        )))
                    }
                }
            }
            if link_names.insert(l.name.clone(), l.id).is_some() {
                return Err(Error::Config(format!("duplicate link name {}", l.name)));
            }
            incoming[l.to.0].push(l.id);
            outgoing[l.from.0].push(l.id);
        }
        Ok(RoadNetwork {
            junctions: self.junctions,
            links: self.links,
            incoming,
            outgoing,
            names,
            link_names,
        })
    }
}

/// Parameters of a generated grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridParams {
    pub rows: usize,
    pub cols: usize,
    pub link_length: f64,
    pub free_flow_time: u32,
    pub capacity: u32,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            rows: 3,
            cols: 3,
            link_length: 200.0,
            free_flow_time: 20,
            capacity: 1,
        }
    }
}

/// Builds a `rows × cols` grid with boundary source/sink junctions.
pub fn build_grid(
    rows: usize,
    cols: usize,
    link_length: f64,
    free_flow_time: u32,
    capacity: u32,
) -> Result<RoadNetwork> {
    if rows < 1 || cols < 1 {
        return Err(Error::Config(format!(
            "grid dimensions must be positive, got {rows}x{cols}"
        )));
    }
    if rows > i32::MAX as usize / 2 || cols > i32::MAX as usize / 2 {
        return Err(Error::Config("grid dimensions too large".into()));
    }
    let mut b = NetworkBuilder::new();
    let mut interior = vec![vec![JunctionId(0); cols]; rows];
    for (r, row) in interior.iter_mut().enumerate() {
        for (c, slot) in row.iter_mut().enumerate() {
            *slot = b.junction(
                format!("J_{r}_{c}"),
                (r as i32, c as i32),
                true,
                GRID_MANEUVERS,
            );
        }
    }
    let (ri, ci) = (rows as i32, cols as i32);
    let north: Vec<_> = (0..cols)
        .map(|c| b.boundary_junction(format!("N_{c}"), (-1, c as i32), Side::North))
        .collect();
    let east: Vec<_> = (0..rows)
        .map(|r| b.boundary_junction(format!("E_{r}"), (r as i32, ci), Side::East))
        .collect();
    let south: Vec<_> = (0..cols)
        .map(|c| b.boundary_junction(format!("S_{c}"), (ri, c as i32), Side::South))
        .collect();
    let west: Vec<_> = (0..rows)
        .map(|r| b.boundary_junction(format!("W_{r}"), (r as i32, -1), Side::West))
        .collect();

    // `side` is where `a` lies as seen from `b`.
    let pair = |b: &mut NetworkBuilder,
                a: JunctionId,
                c: JunctionId,
                side_of_a: Side,
                a_signal: bool,
                c_signal: bool| {
        let into_c = if c_signal {
            Some(side_of_a.index())
        } else {
            None
        };
        let into_a = if a_signal {
            Some(side_of_a.opposite().index())
        } else {
            None
        };
        b.link(a, c, link_length, free_flow_time, capacity, into_c);
        b.link(c, a, link_length, free_flow_time, capacity, into_a);
    };

    for r in 0..rows {
        for c in 0..cols {
            let here = interior[r][c];
            if c + 1 < cols {
                pair(&mut b, here, interior[r][c + 1], Side::West, true, true);
            }
            if r + 1 < rows {
                pair(&mut b, here, interior[r + 1][c], Side::North, true, true);
            }
        }
    }
    for c in 0..cols {
        pair(&mut b, north[c], interior[0][c], Side::North, false, true);
        pair(
            &mut b,
            south[c],
            interior[rows - 1][c],
            Side::South,
            false,
            true,
        );
    }
    for r in 0..rows {
        pair(&mut b, west[r], interior[r][0], Side::West, false, true);
        pair(
            &mut b,
            east[r],
            interior[r][cols - 1],
            Side::East,
            false,
            true,
        );
    }
    b.build()
}

#[derive(Debug, Clone, PartialEq)]
struct Label {
    length: f64,
    path: Vec<LinkId>,
    node: JunctionId,
}

impl Eq for Label {}

impl Ord for Label {
    // Reversed so that BinaryHeap pops the shortest, then lexicographically smallest path.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .length
            .total_cmp(&self.length)
            .then_with(|| other.path.cmp(&self.path))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl RoadNetwork {
    pub fn junctions(&self) -> &[Junction] {
        &self.junctions
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn junction(&self, id: JunctionId) -> Result<&Junction> {
        self.junctions
            .get(id.0)
            .ok_or_else(|| Error::Lookup(format!("unknown junction {id}")))
    }

    pub fn link(&self, id: LinkId) -> Result<&Link> {
        self.links
            .get(id.0)
            .ok_or_else(|| Error::Lookup(format!("unknown link {id}")))
    }

    pub fn junction_by_name(&self, name: &str) -> Result<JunctionId> {
        self.names
            .get(name)
            .copied()
            .ok_or_else(|| Error::Lookup(format!("unknown junction {name}")))
    }

    pub fn link_by_name(&self, name: &str) -> Result<LinkId> {
        self.link_names
            .get(name)
            .copied()
            .ok_or_else(|| Error::Lookup(format!("unknown link {name}")))
    }

    pub fn incoming(&self, id: JunctionId) -> &[LinkId] {
        self.incoming.get(id.0).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn outgoing(&self, id: JunctionId) -> &[LinkId] {
        self.outgoing.get(id.0).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn signalized(&self) -> impl Iterator<Item = &Junction> {
        self.junctions.iter().filter(|j| j.signalized)
    }

    /// Unsignalized junctions that originate or absorb traffic, in id order.
    pub fn boundary(&self) -> impl Iterator<Item = &Junction> {
        self.junctions.iter().filter(|j| j.boundary.is_some())
    }

    /// Signalized junctions sharing a direct link with `j`, with the length of
    /// the shortest such link, sorted by junction id.
    pub fn neighbors_of(&self, j: JunctionId) -> Result<Vec<(JunctionId, f64)>> {
        let junction = self.junction(j)?;
        if !junction.signalized {
            return Err(Error::Lookup(format!(
                "{} is not a traffic light",
                junction.name
            )));
        }
        let mut found: BTreeMap<JunctionId, f64> = BTreeMap::new();
        let direct = self.outgoing(j).iter().map(|l| (self.links[l.0].to, l));
        let reverse = self.incoming(j).iter().map(|l| (self.links[l.0].from, l));
        for (other, link) in direct.chain(reverse) {
            if !self.junctions[other.0].signalized {
                continue;
            }
            let len = self.links[link.0].length;
            found
                .entry(other)
                .and_modify(|d| *d = d.min(len))
                .or_insert(len);
        }
        Ok(found.into_iter().collect())
    }

    /// Minimum-length route, ties broken by the lexicographically smallest
    /// sequence of link ids.
    pub fn shortest_route(&self, origin: JunctionId, dest: JunctionId) -> Result<Route> {
        self.junction(origin)?;
        self.junction(dest)?;
        if origin == dest {
            return Err(Error::Contract("route origin equals destination".into()));
        }
        let mut settled = vec![false; self.junctions.len()];
        let mut heap = BinaryHeap::new();
        heap.push(Label {
            length: 0.0,
            path: Vec::new(),
            node: origin,
        });
        while let Some(Label { length, path, node }) = heap.pop() {
            if settled[node.0] {
                continue;
            }
            settled[node.0] = true;
            if node == dest {
                return Ok(Route { links: path });
            }
            for &l in self.outgoing(node) {
                let link = &self.links[l.0];
                if settled[link.to.0] {
                    continue;
                }
                let mut next = path.clone();
                next.push(l);
                heap.push(Label {
                    length: length + link.length,
                    path: next,
                    node: link.to,
                });
            }
        }
        Err(Error::Routing {
            from: self.junctions[origin.0].name.clone(),
            to: self.junctions[dest.0].name.clone(),
        })
    }

    /// Rebuilds the name indexes after deserialization.
    pub fn reindex(&mut self) {
        self.names = self
            .junctions
            .iter()
            .map(|j| (j.name.clone(), j.id))
            .collect();
        self.link_names = self.links.iter().map(|l| (l.name.clone(), l.id)).collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(net: &RoadNetwork, name: &str) -> JunctionId {
        net.junction_by_name(name).unwrap()
    }

    #[test]
    fn smallest_grid_counts() {
        let net = build_grid(1, 1, 200.0, 20, 1).unwrap();
        assert_eq!(net.signalized().count(), 1);
        assert_eq!(net.boundary().count(), 4);
        assert_eq!(net.links().len(), 8);
    }

    #[test]
    fn three_by_three_adjacency_matches_hand_enumeration() {
        // 12 internal orthogonal pairs + 12 boundary attachments, two directions each.
        let net = build_grid(3, 3, 200.0, 20, 1).unwrap();
        assert_eq!(net.signalized().count(), 9);
        assert_eq!(net.boundary().count(), 12);
        assert_eq!(net.links().len(), 48);
        for j in net.signalized() {
            assert_eq!(net.incoming(j.id).len(), 4, "{}", j.name);
            assert_eq!(net.outgoing(j.id).len(), 4, "{}", j.name);
            let mut groups: Vec<_> = net
                .incoming(j.id)
                .iter()
                .map(|l| net.link(*l).unwrap().signal_group.unwrap())
                .collect();
            groups.sort();
            assert_eq!(groups, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn signal_groups_follow_approach_side() {
        let net = build_grid(3, 3, 200.0, 20, 1).unwrap();
        let center = id(&net, "J_1_1");
        for &l in net.incoming(center) {
            let link = net.link(l).unwrap();
            let from = net.junction(link.from).unwrap().name.clone();
            let expected = match from.as_str() {
                "J_0_1" => 0,
                "J_1_2" => 1,
                "J_2_1" => 2,
                "J_1_0" => 3,
                other => panic!("unexpected neighbor {other}"),
            };
            assert_eq!(link.signal_group, Some(expected));
        }
    }

    #[test]
    fn two_by_one_neighbors_at_link_length() {
        let net = build_grid(2, 1, 150.0, 15, 2).unwrap();
        let a = id(&net, "J_0_0");
        let b = id(&net, "J_1_0");
        assert_eq!(net.neighbors_of(a).unwrap(), vec![(b, 150.0)]);
        assert_eq!(net.neighbors_of(b).unwrap(), vec![(a, 150.0)]);
    }

    #[test]
    fn neighbor_counts_by_position() {
        let net = build_grid(3, 3, 200.0, 20, 1).unwrap();
        assert_eq!(net.neighbors_of(id(&net, "J_0_0")).unwrap().len(), 2);
        assert_eq!(net.neighbors_of(id(&net, "J_0_1")).unwrap().len(), 3);
        let center = net.neighbors_of(id(&net, "J_1_1")).unwrap();
        assert_eq!(center.len(), 4);
        assert!(center.iter().all(|(_, d)| *d == 200.0));
        let single = build_grid(1, 1, 200.0, 20, 1).unwrap();
        assert!(single
            .neighbors_of(id(&single, "J_0_0"))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn neighbors_reject_unknown_and_unsignalized() {
        let net = build_grid(2, 2, 200.0, 20, 1).unwrap();
        assert!(matches!(
            net.neighbors_of(JunctionId(999)),
            Err(Error::Lookup(_))
        ));
        assert!(matches!(
            net.neighbors_of(id(&net, "N_0")),
            Err(Error::Lookup(_))
        ));
    }

    #[test]
    fn invalid_dimensions_are_config_errors() {
        assert!(matches!(
            build_grid(0, 3, 200.0, 20, 1),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            build_grid(3, 0, 200.0, 20, 1),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            build_grid(1, 1, 0.0, 20, 1),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            build_grid(1, 1, 200.0, 0, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn straight_route_across_grid() {
        let net = build_grid(3, 3, 200.0, 20, 1).unwrap();
        let route = net
            .shortest_route(id(&net, "W_1"), id(&net, "E_1"))
            .unwrap();
        let names: Vec<_> = route
            .links()
            .iter()
            .map(|l| net.link(*l).unwrap().name.as_str())
            .collect();
        assert_eq!(
            names,
            ["W_1>J_1_0", "J_1_0>J_1_1", "J_1_1>J_1_2", "J_1_2>E_1"]
        );
    }

    #[test]
    fn diagonal_route_takes_smallest_link_sequence() {
        let net = build_grid(3, 3, 200.0, 20, 1).unwrap();
        let from = id(&net, "N_0");
        let to = id(&net, "E_2");
        let route = net.shortest_route(from, to).unwrap();
        // Brute force over all simple paths of minimal length.
        let mut best: Option<(f64, Vec<LinkId>)> = None;
        let mut stack = vec![(from, Vec::<LinkId>::new(), 0.0, vec![from])];
        while let Some((node, path, len, seen)) = stack.pop() {
            if node == to {
                let better = match &best {
                    None => true,
                    Some((bl, bp)) => len < *bl || (len == *bl && path < *bp),
                };
                if better {
                    best = Some((len, path));
                }
                continue;
            }
            if len > 1600.0 {
                continue;
            }
            for &l in net.outgoing(node) {
                let link = net.link(l).unwrap();
                if seen.contains(&link.to) {
                    continue;
                }
                let mut p = path.clone();
                p.push(l);
                let mut s = seen.clone();
                s.push(link.to);
                stack.push((link.to, p, len + link.length, s));
            }
        }
        assert_eq!(route.links(), best.unwrap().1.as_slice());
    }

    #[test]
    fn unreachable_destination_is_routing_error() {
        let mut b = NetworkBuilder::new();
        let a = b.junction("A", (0, 0), false, 0);
        let c = b.junction("C", (0, 1), false, 0);
        b.link(c, a, 100.0, 10, 1, None);
        let net = b.build().unwrap();
        assert!(matches!(
            net.shortest_route(a, c),
            Err(Error::Routing { .. })
        ));
        assert!(net.shortest_route(c, a).is_ok());
    }

    #[test]
    fn route_contiguity_is_checked() {
        let net = build_grid(2, 2, 200.0, 20, 1).unwrap();
        let l1 = net.link_by_name("W_0>J_0_0").unwrap();
        let l2 = net.link_by_name("J_1_0>J_1_1").unwrap();
        assert!(Route::new(&net, vec![l1, l2]).is_err());
        assert!(Route::new(&net, vec![]).is_err());
        let l3 = net.link_by_name("J_0_0>J_0_1").unwrap();
        assert!(Route::new(&net, vec![l1, l3]).is_ok());
    }

    #[test]
    fn grid_is_deterministic() {
        assert_eq!(
            build_grid(3, 4, 180.0, 18, 2).unwrap(),
            build_grid(3, 4, 180.0, 18, 2).unwrap()
        );
    }
}
