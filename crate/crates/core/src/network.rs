//! Road networks built from centerline segments.
//!
//! Two segments are adjacent when they share an endpoint node. Adjacency is
//! derived once at construction and the network is immutable afterwards.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{discretize, FeatureError, FeatureRecord, RawFeatures};
use crate::lts::LtsLabel;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("parse error at {locus}: {message}")]
    Parse { locus: String, message: String },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("segment {0:?} has identical endpoints")]
    SelfLoop(String),
    #[error("segment {segment:?} references unknown node {node:?}")]
    DanglingNode { segment: String, node: String },
    #[error("segment {segment:?}: {source}")]
    Feature {
        segment: String,
        #[source]
        source: FeatureError,
    },
    #[error("unknown segment id {0:?}")]
    UnknownSegment(String),
    #[error("unknown region tag {0:?}")]
    UnknownRegion(String),
    #[error("spatial split requires a region tag on every segment; {0:?} has none")]
    MissingRegion(String),
    #[error("split fractions must be non-negative and sum to 1, got {0:?}")]
    BadFractions([f64; 3]),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Csv,
    Json,
}

impl FileFormat {
    pub fn from_path(path: &Path) -> FileFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => FileFormat::Json,
            _ => FileFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRecord {
    pub id: String,
    pub node_a: String,
    pub node_b: String,
    pub region: Option<String>,
    pub length_m: Option<f64>,
    pub features: FeatureRecord,
    pub lts: Option<LtsLabel>,
}

impl SegmentRecord {
    pub fn new(id: impl Into<String>, node_a: impl Into<String>, node_b: impl Into<String>) -> Self {
        SegmentRecord {
            id: id.into(),
            node_a: node_a.into(),
            node_b: node_b.into(),
            region: None,
            length_m: None,
            features: FeatureRecord::default(),
            lts: None,
        }
    }
}

/// One row of a segment file. Shared by the CSV and JSON readers and writers.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SegmentRow {
    pub segment_id: String,
    pub node_a: String,
    pub node_b: String,
    #[serde(default)]
    pub region: Option<String>,
    #[serde(default)]
    pub road_type: Option<String>,
    #[serde(default)]
    pub direction: Option<String>,
    #[serde(default)]
    pub n_lanes_total: Option<u32>,
    #[serde(default)]
    pub speed_kmh: Option<f64>,
    #[serde(default, rename = "infra_type", alias = "infra")]
    pub infra: Option<String>,
    #[serde(default)]
    pub parking: Option<String>,
    #[serde(default)]
    pub daily_volume: Option<f64>,
    #[serde(default)]
    pub lts: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_m: Option<f64>,
}

impl SegmentRow {
    fn into_record(self) -> Result<SegmentRecord, NetworkError> {
        let raw = RawFeatures {
            road_type: self.road_type,
            direction: self.direction,
            n_lanes_total: self.n_lanes_total,
            speed_kmh: self.speed_kmh,
            infra: self.infra,
            parking: self.parking,
            daily_volume: self.daily_volume,
        };
        let features = discretize(&raw).map_err(|source| NetworkError::Feature {
            segment: self.segment_id.clone(),
            source,
        })?;
        let lts = self
            .lts
            .map(|v| LtsLabel::new(v as i64))
            .transpose()
            .map_err(|e| NetworkError::Parse {
                locus: format!("segment {:?}", self.segment_id),
                message: e.to_string(),
            })?;
        Ok(SegmentRecord {
            id: self.segment_id,
            node_a: self.node_a,
            node_b: self.node_b,
            region: self.region.filter(|r| !r.trim().is_empty()),
            length_m: self.length_m,
            features,
            lts,
        })
    }

    pub fn from_record(seg: &SegmentRecord) -> SegmentRow {
        let raw = seg.features.representative_raw();
        SegmentRow {
            segment_id: seg.id.clone(),
            node_a: seg.node_a.clone(),
            node_b: seg.node_b.clone(),
            region: seg.region.clone(),
            road_type: raw.road_type,
            direction: raw.direction,
            n_lanes_total: raw.n_lanes_total,
            speed_kmh: raw.speed_kmh,
            infra: raw.infra,
            parking: raw.parking,
            daily_volume: raw.daily_volume,
            lts: seg.lts.map(LtsLabel::value),
            length_m: seg.length_m,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Drop segments whose `length_m` is known and shorter than this.
    pub min_length: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RoadNetwork {
    segments: Vec<SegmentRecord>,
    by_id: HashMap<String, usize>,
    nodes: BTreeMap<String, Vec<usize>>,
    adjacency: Vec<Vec<usize>>,
}

impl RoadNetwork {
    pub fn from_segments(segments: Vec<SegmentRecord>) -> Result<Self, NetworkError> {
        let mut by_id = HashMap::with_capacity(segments.len());
        let mut nodes: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, seg) in segments.iter().enumerate() {
            if seg.node_a == seg.node_b {
                return Err(NetworkError::SelfLoop(seg.id.clone()));
            }
            if by_id.insert(seg.id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateId(seg.id.clone()));
            }
            nodes.entry(seg.node_a.clone()).or_default().push(i);
            nodes.entry(seg.node_b.clone()).or_default().push(i);
        }
        let mut adjacency = vec![Vec::new(); segments.len()];
        for incident in nodes.values() {
            for &i in incident {
                adjacency[i].extend(incident.iter().copied().filter(|&j| j != i));
            }
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
        }
        Ok(RoadNetwork {
            segments,
            by_id,
            nodes,
            adjacency,
        })
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[SegmentRecord] {
        &self.segments
    }

    pub fn segment(&self, i: usize) -> &SegmentRecord {
        &self.segments[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn require_index(&self, id: &str) -> Result<usize, NetworkError> {
        self.index_of(id).ok_or_else(|| NetworkError::UnknownSegment(id.to_string()))
    }

    /// Segments sharing an endpoint with segment `i`, sorted by index.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    /// Node id to incident segment indices.
    pub fn nodes(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.nodes
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().map(|s| s.id.as_str())
    }

    /// Checks adjacency symmetry, irreflexivity and node references.
    pub fn validate(&self) -> Result<(), NetworkError> {
        for (i, adj) in self.adjacency.iter().enumerate() {
            for &j in adj {
                if j == i || self.adjacency[j].binary_search(&i).is_err() {
                    return Err(NetworkError::Parse {
                        locus: format!("segment {:?}", self.segments[i].id),
                        message: "adjacency is not symmetric and irreflexive".into(),
                    });
                }
            }
        }
        for seg in &self.segments {
            for node in [&seg.node_a, &seg.node_b] {
                if !self.nodes.contains_key(node) {
                    return Err(NetworkError::DanglingNode {
                        segment: seg.id.clone(),
                        node: node.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

fn rows_from_csv<R: Read>(reader: R) -> Result<Vec<SegmentRow>, NetworkError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for result in rdr.deserialize::<SegmentRow>() {
        let row = result.map_err(|e| NetworkError::Parse {
            locus: e
                .position()
                .map(|p| format!("line {}", p.line()))
                .unwrap_or_else(|| "header".into()),
            message: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

fn rows_from_json<R: Read>(reader: R) -> Result<Vec<SegmentRow>, NetworkError> {
    serde_json::from_reader(reader).map_err(|e| NetworkError::Parse {
        locus: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })
}

pub fn read_network<R: Read>(reader: R, format: FileFormat, opts: &LoadOptions) -> Result<RoadNetwork, NetworkError> {
    let rows = match format {
        FileFormat::Csv => rows_from_csv(reader)?,
        FileFormat::Json => rows_from_json(reader)?,
    };
    let mut segments = Vec::with_capacity(rows.len());
    for row in rows {
        let seg = row.into_record()?;
        if let (Some(min), Some(len)) = (opts.min_length, seg.length_m) {
            if len < min {
                continue;
            }
        }
        segments.push(seg);
    }
    RoadNetwork::from_segments(segments)
}

pub fn load_network(path: &Path, format: FileFormat) -> Result<RoadNetwork, NetworkError> {
    load_network_with(path, format, &LoadOptions::default())
}

pub fn load_network_with(path: &Path, format: FileFormat, opts: &LoadOptions) -> Result<RoadNetwork, NetworkError> {
    let file = File::open(path)?;
    read_network(BufReader::new(file), format, opts)
}

pub fn write_network_csv<W: Write>(net: &RoadNetwork, writer: W) -> Result<(), NetworkError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for seg in net.segments() {
        wtr.serialize(SegmentRow::from_record(seg)).map_err(csv_write_err)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_write_err(e: csv::Error) -> NetworkError {
    NetworkError::Io(std::io::Error::other(e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Train,
    Validation,
    Test,
}

impl SplitRole {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitRole::Train => "train",
            SplitRole::Validation => "validation",
            SplitRole::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitMode {
    /// Fractions for (train, validation, test).
    Random { fractions: [f64; 3], seed: u64 },
    /// Test set = the region; the rest is split 80/20 train/validation.
    Spatial { test_region: String, seed: u64 },
}

/// Role of every segment, keyed by segment id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub roles: BTreeMap<String, SplitRole>,
}

impl SplitAssignment {
    pub fn role(&self, id: &str) -> Option<SplitRole> {
        self.roles.get(id).copied()
    }

    pub fn count(&self, role: SplitRole) -> usize {
        self.roles.values().filter(|r| **r == role).count()
    }

    pub fn ids(&self, role: SplitRole) -> impl Iterator<Item = &str> {
        self.roles.iter().filter(move |(_, r)| **r == role).map(|(k, _)| k.as_str())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), NetworkError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["segment_id", "role"]).map_err(csv_write_err)?;
        for (id, role) in &self.roles {
            wtr.write_record([id.as_str(), role.as_str()]).map_err(csv_write_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, NetworkError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut roles = BTreeMap::new();
        for rec in rdr.deserialize::<(String, SplitRole)>() {
            let (id, role) = rec.map_err(|e| NetworkError::Parse {
                locus: e
                    .position()
                    .map(|p| format!("line {}", p.line()))
                    .unwrap_or_default(),
                message: e.to_string(),
            })?;
            if roles.insert(id.clone(), role).is_some() {
                return Err(NetworkError::DuplicateId(id));
            }
        }
        Ok(SplitAssignment { roles })
    }
}

pub fn split(net: &RoadNetwork, mode: &SplitMode) -> Result<SplitAssignment, NetworkError> {
    let mut roles = BTreeMap::new();
    match mode {
        SplitMode::Random { fractions, seed } => {
            let sum: f64 = fractions.iter().sum();
            if fractions.iter().any(|f| !(*f >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(NetworkError::BadFractions(*fractions));
            }
            let n = net.len();
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
            let n_train = ((fractions[0] * n as f64).round() as usize).min(n);
            let n_val = ((fractions[1] * n as f64).round() as usize).min(n - n_train);
            for (rank, &i) in order.iter().enumerate() {
                let role = if rank < n_train {
                    SplitRole::Train
                } else if rank < n_train + n_val {
                    SplitRole::Validation
                } else {
                    SplitRole::Test
                };
                roles.insert(net.segment(i).id.clone(), role);
            }
        }
        SplitMode::Spatial { test_region, seed } => {
            let mut rest = Vec::new();
            let mut found = false;
            for seg in net.segments() {
                let region = seg.region.as_deref().ok_or_else(|| NetworkError::MissingRegion(seg.id.clone()))?;
                if region == test_region {
                    found = true;
                    roles.insert(seg.id.clone(), SplitRole::Test);
                } else {
                    rest.push(seg.id.clone());
                }
            }
            if !found {
                return Err(NetworkError::UnknownRegion(test_region.clone()));
            }
            rest.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
            let n_train = (0.8 * rest.len() as f64).round() as usize;
            for (rank, id) in rest.into_iter().enumerate() {
                let role = if rank < n_train {
                    SplitRole::Train
                } else {
                    SplitRole::Validation
                };
                roles.insert(id, role);
            }
        }
    }
    Ok(SplitAssignment { roles })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHAIN: &str = "segment_id,node_a,node_b,region,road_type,direction,n_lanes_total,speed_kmh,infra_type,parking,daily_volume,lts
AB,A,B,york,local,twoway,2,30,none,no,1000,1
BC,B,C,york,,,,,,,,
CD,C,D,etobicoke,arterial,twoway,4,60,bike_lane,yes,9000,4
";

    fn chain() -> RoadNetwork {
        read_network(CHAIN.as_bytes(), FileFormat::Csv, &LoadOptions::default()).unwrap()
    }

    #[test]
    fn chain_adjacency() {
        let net = chain();
        let bc = net.index_of("BC").unwrap();
        let ids: Vec<&str> = net.neighbors(bc).iter().map(|&j| net.segment(j).id.as_str()).collect();
        assert_eq!(ids, vec!["AB", "CD"]);
        assert_eq!(net.neighbors(net.index_of("AB").unwrap()), &[bc]);
        net.validate().unwrap();
        assert_eq!(net.segment(0).lts, Some(LtsLabel::LTS1));
        assert_eq!(net.segment(1).features, FeatureRecord::default());
        assert_eq!(net.segment(2).features.speed_bin, Some(4));
    }

    #[test]
    fn single_segment_has_no_neighbors() {
        let net = read_network(
            "segment_id,node_a,node_b\nx,1,2\n".as_bytes(),
            FileFormat::Csv,
            &LoadOptions::default(),
        )
        .unwrap();
        assert!(net.neighbors(0).is_empty());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = read_network(
            "segment_id,node_a,node_b\nx,1,2\nx,2,3\n".as_bytes(),
            FileFormat::Csv,
            &LoadOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("duplicate id"));
    }

    #[test]
    fn parse_errors_carry_a_line() {
        let err = read_network(
            "segment_id,node_a,node_b,n_lanes_total\nx,1,2,two\n".as_bytes(),
            FileFormat::Csv,
            &LoadOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = read_network(
            "segment_id,node_a,node_b,infra\nx,1,2,sharrow\n".as_bytes(),
            FileFormat::Csv,
            &LoadOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("infra"), "{err}");
    }

    #[test]
    fn self_loop_rejected() {
        let err = RoadNetwork::from_segments(vec![SegmentRecord::new("x", "1", "1")]).unwrap_err();
        assert!(matches!(err, NetworkError::SelfLoop(_)));
    }

    #[test]
    fn parallel_segments_are_adjacent_once() {
        let net = RoadNetwork::from_segments(vec![SegmentRecord::new("a", "1", "2"), SegmentRecord::new("b", "2", "1")]).unwrap();
        assert_eq!(net.neighbors(0), &[1]);
        assert_eq!(net.neighbors(1), &[0]);
    }

    #[test]
    fn json_mirrors_csv() {
        let json = r#"[
            {"segment_id":"AB","node_a":"A","node_b":"B","region":"york","road_type":"local","direction":"twoway","n_lanes_total":2,"speed_kmh":30,"infra":"none","parking":"no","daily_volume":1000,"lts":1},
            {"segment_id":"BC","node_a":"B","node_b":"C","region":"york"},
            {"segment_id":"CD","node_a":"C","node_b":"D","region":"etobicoke","road_type":"arterial","direction":"twoway","n_lanes_total":4,"speed_kmh":60,"infra":"bike_lane","parking":"yes","daily_volume":9000,"lts":4}
        ]"#;
        let a = read_network(json.as_bytes(), FileFormat::Json, &LoadOptions::default()).unwrap();
        let b = chain();
        assert_eq!(a.segments(), b.segments());
    }

    #[test]
    fn min_length_filter() {
        let csv = "segment_id,node_a,node_b,length_m\na,1,2,30\nb,2,3,80\nc,3,4,\n";
        let all = read_network(csv.as_bytes(), FileFormat::Csv, &LoadOptions::default()).unwrap();
        assert_eq!(all.len(), 3);
        let long = read_network(csv.as_bytes(), FileFormat::Csv, &LoadOptions { min_length: Some(50.0) }).unwrap();
        assert_eq!(long.ids().collect::<Vec<_>>(), vec!["b", "c"]);
    }

    #[test]
    fn csv_write_round_trip() {
        let net = chain();
        let mut buf = Vec::new();
        write_network_csv(&net, &mut buf).unwrap();
        let back = read_network(buf.as_slice(), FileFormat::Csv, &LoadOptions::default()).unwrap();
        assert_eq!(back.segments(), net.segments());
    }

    fn numbered(n: usize, york: usize) -> RoadNetwork {
        let segs = (0..n)
            .map(|i| {
                let mut s = SegmentRecord::new(format!("s{i:03}"), format!("n{i}"), format!("n{}", i + 1));
                s.region = Some(if i < york { "york" } else { "other" }.into());
                s
            })
            .collect();
        RoadNetwork::from_segments(segs).unwrap()
    }

    #[test]
    fn random_split_sizes_and_determinism() {
        let net = numbered(100, 0);
        let mode = SplitMode::Random {
            fractions: [0.7, 0.15, 0.15],
            seed: 7,
        };
        let a = split(&net, &mode).unwrap();
        assert_eq!(
            (a.count(SplitRole::Train), a.count(SplitRole::Validation), a.count(SplitRole::Test)),
            (70, 15, 15)
        );
        assert_eq!(a, split(&net, &mode).unwrap());
        let other = split(
            &net,
            &SplitMode::Random {
                fractions: [0.7, 0.15, 0.15],
                seed: 8,
            },
        )
        .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn spatial_split_sizes() {
        let net = numbered(100, 40);
        let a = split(
            &net,
            &SplitMode::Spatial {
                test_region: "york".into(),
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(a.count(SplitRole::Test), 40);
        assert_eq!(a.count(SplitRole::Train), 48);
        assert_eq!(a.count(SplitRole::Validation), 12);
        assert!(a.ids(SplitRole::Test).all(|id| id < "s040"));
    }

    #[test]
    fn split_errors() {
        let net = numbered(10, 3);
        assert!(matches!(
            split(
                &net,
                &SplitMode::Spatial {
                    test_region: "scarborough".into(),
                    seed: 1
                }
            ),
            Err(NetworkError::UnknownRegion(_))
        ));
        assert!(matches!(
            split(
                &net,
                &SplitMode::Random {
                    fractions: [0.5, 0.2, 0.2],
                    seed: 1
                }
            ),
            Err(NetworkError::BadFractions(_))
        ));
        let untagged = RoadNetwork::from_segments(vec![SegmentRecord::new("a", "1", "2")]).unwrap();
        assert!(matches!(
            split(
                &untagged,
                &SplitMode::Spatial {
                    test_region: "york".into(),
                    seed: 1
                }
            ),
            Err(NetworkError::MissingRegion(_))
        ));
    }

    #[test]
    fn split_csv_round_trip() {
        let net = numbered(20, 5);
        let a = split(
            &net,
            &SplitMode::Random {
                fractions: [0.7, 0.15, 0.15],
                seed: 3,
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(SplitAssignment::read_csv(buf.as_slice()).unwrap(), a);
    }
}
