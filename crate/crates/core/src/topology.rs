//! Node placement and the unit-disk neighbor relation.
//!
//! Two nodes are neighbors iff their Euclidean distance is at most the smaller
//! of their two ranges. The relation is used for reception, discovery, PR
//! pickup and for the CMR-neighbor delivery metric.

use std::collections::VecDeque;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ids::{ChannelId, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    PrDevice,
    CrDevice,
    Cmr,
    Portal,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::PrDevice => "pr",
            Role::CrDevice => "cr",
            Role::Cmr => "cmr",
            Role::Portal => "portal",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pr" => Ok(Role::PrDevice),
            "cr" => Ok(Role::CrDevice),
            "cmr" => Ok(Role::Cmr),
            "portal" => Ok(Role::Portal),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub role: Role,
    pub position: Point,
    /// Transmission and sensing radius in meters.
    pub range: f64,
    pub radio_count: u8,
    /// Operating channel of a PR device; `None` for every other role.
    pub channel: Option<ChannelId>,
}

impl Node {
    /// Unit-disk link test shared by every neighbor computation.
    #[inline]
    pub fn hears(&self, other: &Node) -> bool {
        self.id != other.id && self.position.distance(&other.position) <= self.range.min(other.range)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Area {
    pub fn center(&self) -> Point {
        Point::new(self.width / 2.0, self.height / 2.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new(rng.gen::<f64>() * self.width, rng.gen::<f64>() * self.height)
    }
}

/// Inputs to [`deploy_random`].
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyParams {
    pub area: Area,
    pub cr_count: usize,
    pub pr_count: usize,
    pub cmr_count: usize,
    pub portal_count: usize,
    pub channels: usize,
    pub cr_range: f64,
    pub pr_range: f64,
    pub cmr_range: f64,
    pub portal_range: f64,
    /// Reach of the dedicated CMR backbone radios.
    pub backbone_range: f64,
    pub cr_radios: u8,
    pub cmr_radios: u8,
    /// Redraws allowed per CMR before giving up.
    pub max_retries: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub area: Area,
    pub seed: u64,
    /// Reach of CMR-to-CMR and CMR-to-portal backbone links.
    pub backbone_range: f64,
    /// Indexed by `NodeId`.
    pub nodes: Vec<Node>,
}

/// Places nodes for one run.
///
/// Ids are assigned portal(s) first, then CMRs, CR devices and PR devices.
/// Portals sit at the area center. Each CMR is drawn uniformly and redrawn
/// until it has a backbone link to the portal or to an already placed CMR, so
/// every CMR has a backbone path to a portal.
pub fn deploy_random(params: &TopologyParams, seed: u64) -> Result<Deployment> {
    if !(params.area.width > 0.0 && params.area.height > 0.0) {
        return Err(Error::InvalidArgument("area must be positive".into()));
    }
    if params.portal_count == 0 {
        return Err(Error::InvalidArgument("at least one portal is required".into()));
    }
    if params.cmr_radios < 2 {
        return Err(Error::InvalidArgument("CMRs need at least 2 radios".into()));
    }
    if params.cr_radios < 1 {
        return Err(Error::InvalidArgument("CR devices need at least 1 radio".into()));
    }
    if params.pr_count > 0 && params.channels == 0 {
        return Err(Error::InvalidArgument("PR devices need at least one channel".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::with_capacity(
        params.portal_count + params.cmr_count + params.cr_count + params.pr_count,
    );
    let push = |nodes: &mut Vec<Node>, role, position, range, radio_count, channel| {
        let id = NodeId(nodes.len() as u32);
        nodes.push(Node {
            id,
            role,
            position,
            range,
            radio_count,
            channel,
        });
    };

    let center = params.area.center();
    for _ in 0..params.portal_count {
        push(&mut nodes, Role::Portal, center, params.portal_range, 1, None);
    }

    let mut anchors: Vec<Point> = vec![center];
    for k in 0..params.cmr_count {
        let mut placed = None;
        for _ in 0..params.max_retries.max(1) {
            let p = params.area.sample(&mut rng);
            if anchors
                .iter()
                .any(|a| a.distance(&p) <= params.backbone_range)
            {
                placed = Some(p);
                break;
            }
        }
        let p = placed.ok_or_else(|| {
            Error::GenerationFailure(format!(
                "CMR {k} found no backbone link within {} draws",
                params.max_retries
            ))
        })?;
        anchors.push(p);
        push(&mut nodes, Role::Cmr, p, params.cmr_range, params.cmr_radios, None);
    }

    for _ in 0..params.cr_count {
        let p = params.area.sample(&mut rng);
        push(&mut nodes, Role::CrDevice, p, params.cr_range, params.cr_radios, None);
    }
    for _ in 0..params.pr_count {
        let p = params.area.sample(&mut rng);
        let ch = ChannelId(rng.gen_range(0..params.channels) as u16);
        push(&mut nodes, Role::PrDevice, p, params.pr_range, 1, Some(ch));
    }

    Ok(Deployment {
        area: params.area,
        seed,
        backbone_range: params.backbone_range,
        nodes,
    })
}

impl Deployment {
    pub fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes.get(id.index()).ok_or(Error::NotFound(id))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ids_with_role(&self, role: Role) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().filter(move |n| n.role == role).map(|n| n.id)
    }

    pub fn count(&self, role: Role) -> usize {
        self.nodes.iter().filter(|n| n.role == role).count()
    }

    /// All nodes within `min(range_a, range_b)` of `id`, excluding itself, in id order.
    pub fn neighbors(&self, id: NodeId) -> Result<Vec<NodeId>> {
        let me = self.node(id)?;
        Ok(self
            .nodes
            .iter()
            .filter(|other| me.hears(other))
            .map(|other| other.id)
            .collect())
    }

    /// Backbone adjacency: a link between two CMRs, or a CMR and a portal,
    /// whose distance is within the backbone range.
    pub fn backbone_linked(&self, a: NodeId, b: NodeId) -> bool {
        let (Some(na), Some(nb)) = (self.nodes.get(a.index()), self.nodes.get(b.index())) else {
            return false;
        };
        let is_backbone = |r| matches!(r, Role::Cmr | Role::Portal);
        a != b
            && is_backbone(na.role)
            && is_backbone(nb.role)
            && !(na.role == Role::Portal && nb.role == Role::Portal)
            && na.position.distance(&nb.position) <= self.backbone_range
    }

    /// Fewest backbone hops from each node to a portal (`Some(0)` for portals,
    /// `None` for nodes off the backbone or disconnected from it).
    pub fn backbone_hops(&self) -> Vec<Option<u32>> {
        let mut hops = vec![None; self.nodes.len()];
        let mut queue = VecDeque::new();
        for id in self.ids_with_role(Role::Portal) {
            hops[id.index()] = Some(0);
            queue.push_back(id);
        }
        while let Some(u) = queue.pop_front() {
            let h = hops[u.index()].unwrap_or(0);
            for v in self.ids_with_role(Role::Cmr) {
                if hops[v.index()].is_none() && self.backbone_linked(u, v) {
                    hops[v.index()] = Some(h + 1);
                    queue.push_back(v);
                }
            }
        }
        hops
    }

    /// Every CMR reaches a portal over backbone links.
    pub fn backbone_connected(&self) -> bool {
        let hops = self.backbone_hops();
        self.ids_with_role(Role::Cmr).all(|id| hops[id.index()].is_some())
    }

    /// Line-oriented text form: header comments, then one node per line as
    /// `id role x y range radios channel` with `-` for no channel.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# crdrn deployment v1");
        let _ = writeln!(out, "# area {} {}", self.area.width, self.area.height);
        let _ = writeln!(out, "# seed {}", self.seed);
        let _ = writeln!(out, "# backbone_range {}", self.backbone_range);
        for n in &self.nodes {
            let ch = n.channel.map_or_else(|| "-".to_string(), |c| c.0.to_string());
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {}",
                n.id.0, n.role, n.position.x, n.position.y, n.range, n.radio_count, ch
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Deployment> {
        let mut area = None;
        let mut seed = 0;
        let mut backbone_range = None;
        let mut nodes = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |reason: String| Error::Parse {
                line: line_no,
                reason,
            };
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let parts: Vec<&str> = comment.split_whitespace().collect();
                match parts.as_slice() {
                    ["area", w, h] => {
                        let w = parse_num::<f64>(w).map_err(err)?;
                        let h = parse_num::<f64>(h).map_err(err)?;
                        area = Some(Area { width: w, height: h });
                    }
                    ["seed", s] => seed = parse_num(s).map_err(err)?,
                    ["backbone_range", r] => backbone_range = Some(parse_num(r).map_err(err)?),
                    _ => {}
                }
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 7 {
                return Err(err(format!("expected 7 fields, found {}", f.len())));
            }
            let id: u32 = parse_num(f[0]).map_err(err)?;
            if id as usize != nodes.len() {
                return Err(err(format!("node id {id} out of sequence")));
            }
            let role: Role = f[1].parse().map_err(err)?;
            let x = parse_num(f[2]).map_err(err)?;
            let y = parse_num(f[3]).map_err(err)?;
            let range = parse_num(f[4]).map_err(err)?;
            let radio_count = parse_num(f[5]).map_err(err)?;
            let channel = match f[6] {
                "-" => None,
                c => Some(ChannelId(parse_num(c).map_err(err)?)),
            };
            nodes.push(Node {
                id: NodeId(id),
                role,
                position: Point::new(x, y),
                range,
                radio_count,
                channel,
            });
        }
        let area = area.ok_or(Error::Parse {
            line: 0,
            reason: "missing `# area` header".into(),
        })?;
        let backbone_range = backbone_range.unwrap_or_else(|| {
            nodes
                .iter()
                .filter(|n| n.role == Role::Cmr)
                .map(|n| n.range)
                .fold(0.0, f64::max)
        });
        Ok(Deployment {
            area,
            seed,
            backbone_range,
            nodes,
        })
    }
}

fn parse_num<T: FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("bad number `{s}`"))
}

/// Precomputed symmetric adjacency lists, one per node, in id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborTable {
    adjacency: Vec<Vec<NodeId>>,
}

impl NeighborTable {
    pub fn build(deployment: &Deployment) -> Self {
        let n = deployment.nodes.len();
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if deployment.nodes[i].hears(&deployment.nodes[j]) {
                    adjacency[i].push(NodeId(j as u32));
                    adjacency[j].push(NodeId(i as u32));
                }
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        NeighborTable { adjacency }
    }

    #[inline]
    pub fn of(&self, id: NodeId) -> &[NodeId] {
        &self.adjacency[id.index()]
    }

    pub fn are_neighbors(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency[a.index()].binary_search(&b).is_ok()
    }
}
