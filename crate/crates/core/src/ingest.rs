//! Dense user-item interaction data used as the expected reward `q_r`.
//!
//! Two CSV files with a mandatory header:
//!
//! * ratings: `user_id,item_id,score`, one row per (user, item) pair; every
//!   pair must be present exactly once.
//! * features: `user_id,f1,...,fd`, one row per user.
//!
//! Rows are ordered by user id and columns by item id. Ids sort numerically
//! when every id in the set parses as an integer, lexicographically
//! otherwise.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use rand::seq::index::sample;
use rand::Rng;

use crate::domain::UserPopulation;
use crate::error::{Error, Result};
use crate::reward::RewardModel;

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDataset {
    ratings: Array2<f64>,
    features: Array2<f64>,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
}

impl InteractionDataset {
    pub fn new(
        ratings: Array2<f64>,
        features: Array2<f64>,
        user_ids: Vec<String>,
        item_ids: Vec<String>,
    ) -> Result<Self> {
        if ratings.nrows() != user_ids.len() || ratings.ncols() != item_ids.len() {
            return Err(Error::ShapeMismatch { expected: (user_ids.len(), item_ids.len()), found: ratings.dim() });
        }
        if features.nrows() != user_ids.len() {
            return Err(Error::ShapeMismatch { expected: (user_ids.len(), features.ncols()), found: features.dim() });
        }
        if ratings.iter().chain(features.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("ratings", "scores and features must be finite"));
        }
        Ok(Self { ratings, features, user_ids, item_ids })
    }

    pub fn ratings(&self) -> &Array2<f64> {
        &self.ratings
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn population(&self) -> Result<UserPopulation> {
        UserPopulation::uniform(self.features.clone())
    }

    /// Uniform sample of users and items without replacement. Sampled rows
    /// and columns keep their source order.
    pub fn subsample<R: Rng + ?Sized>(&self, n_users: usize, n_items: usize, rng: &mut R) -> Result<Self> {
        if n_users == 0 || n_users > self.users() {
            return Err(Error::invalid("n_users", format!("{n_users} not in 1..={}", self.users())));
        }
        if n_items == 0 || n_items > self.items() {
            return Err(Error::invalid("n_items", format!("{n_items} not in 1..={}", self.items())));
        }
        let mut rows = sample(rng, self.users(), n_users).into_vec();
        let mut cols = sample(rng, self.items(), n_items).into_vec();
        rows.sort_unstable();
        cols.sort_unstable();
        Ok(Self {
            ratings: self.ratings.select(Axis(0), &rows).select(Axis(1), &cols),
            features: self.features.select(Axis(0), &rows),
            user_ids: rows.iter().map(|&r| self.user_ids[r].clone()).collect(),
            item_ids: cols.iter().map(|&c| self.item_ids[c].clone()).collect(),
        })
    }

    /// `q_c = 1` and `q_r` = ratings, shifted up by `-min` when any rating is
    /// negative.
    pub fn to_reward_model(&self) -> Result<RewardModel> {
        let min = self.ratings.iter().copied().fold(f64::INFINITY, f64::min);
        let q_r = if min < 0.0 {
            log::warn!("ratings contain negative scores; shifting all entries by {}", -min);
            self.ratings.mapv(|v| v - min)
        } else {
            self.ratings.clone()
        };
        RewardModel::always_consumed(q_r)
    }

    /// Writes both files in the loader's format.
    pub fn write(&self, ratings_path: impl AsRef<Path>, features_path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(ratings_path.as_ref())?;
        w.write_record(["user_id", "item_id", "score"])?;
        for (j, user) in self.user_ids.iter().enumerate() {
            for (k, item) in self.item_ids.iter().enumerate() {
                w.write_record([user.as_str(), item.as_str(), &self.ratings[[j, k]].to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(ratings_path.as_ref(), e))?;

        let mut w = csv::Writer::from_path(features_path.as_ref())?;
        let header: Vec<String> = std::iter::once("user_id".to_string())
            .chain((1..=self.features.ncols()).map(|i| format!("f{i}")))
            .collect();
        w.write_record(&header)?;
        for (j, user) in self.user_ids.iter().enumerate() {
            let mut row = vec![user.clone()];
            row.extend(self.features.row(j).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(features_path.as_ref(), e))?;
        Ok(())
    }
}

fn data_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Data { path: path.to_path_buf(), message: message.into() }
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

fn parse_number(path: &Path, line: u64, column: &str, text: &str) -> Result<f64> {
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(data_error(path, format!("line {line}: {column} `{text}` is not a finite number"))),
    }
}

fn sort_ids(ids: BTreeSet<String>) -> Vec<String> {
    // the set iterates in lexicographic order already
    let mut ids: Vec<String> = ids.into_iter().collect();
    if ids.iter().all(|id| id.parse::<i64>().is_ok()) {
        ids.sort_by_key(|id| id.parse::<i64>().expect("checked above"));
    }
    ids
}

fn index_of(ids: &[String]) -> HashMap<&str, usize> {
    ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
}

pub fn load_interactions(
    ratings_path: impl AsRef<Path>,
    features_path: impl AsRef<Path>,
) -> Result<InteractionDataset> {
    let ratings_path = ratings_path.as_ref();
    let features_path = features_path.as_ref();

    let mut triples: Vec<(String, String, f64)> = Vec::new();
    let mut reader = open(ratings_path)?;
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["user_id", "item_id", "score"] {
        return Err(data_error(ratings_path, "header must be `user_id,item_id,score`"));
    }
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(data_error(ratings_path, format!("line {line}: expected 3 fields")));
        }
        let score = parse_number(ratings_path, line, "score", &record[2])?;
        triples.push((record[0].to_string(), record[1].to_string(), score));
    }

    let mut feature_rows: Vec<(String, Vec<f64>)> = Vec::new();
    let mut reader = open(features_path)?;
    let header = reader.headers()?.clone();
    if header.get(0) != Some("user_id") {
        return Err(data_error(features_path, "first header column must be `user_id`"));
    }
    let dim = header.len() - 1;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != dim + 1 {
            return Err(data_error(features_path, format!("line {line}: expected {} fields", dim + 1)));
        }
        let values =
            (1..=dim).map(|i| parse_number(features_path, line, &header[i], &record[i])).collect::<Result<Vec<_>>>()?;
        feature_rows.push((record[0].to_string(), values));
    }

    let user_ids = sort_ids(triples.iter().map(|(u, _, _)| u.clone()).collect());
    let item_ids = sort_ids(triples.iter().map(|(_, i, _)| i.clone()).collect());
    if user_ids.is_empty() {
        return Err(data_error(ratings_path, "no ratings"));
    }
    let users = index_of(&user_ids);
    let items = index_of(&item_ids);

    let mut ratings = Array2::from_elem((user_ids.len(), item_ids.len()), f64::NAN);
    for (u, i, score) in &triples {
        let cell = &mut ratings[[users[u.as_str()], items[i.as_str()]]];
        if !cell.is_nan() {
            return Err(data_error(ratings_path, format!("duplicate pair (user {u}, item {i})")));
        }
        *cell = *score;
    }
    if let Some(((j, k), _)) = ratings.indexed_iter().find(|(_, v)| v.is_nan()) {
        return Err(data_error(ratings_path, format!("missing pair (user {}, item {})", user_ids[j], item_ids[k])));
    }

    let mut features = Array2::from_elem((user_ids.len(), dim), f64::NAN);
    let mut seen = vec![false; user_ids.len()];
    for (u, values) in feature_rows {
        let Some(&j) = users.get(u.as_str()) else {
            return Err(data_error(features_path, format!("user {u} has features but no ratings")));
        };
        if std::mem::replace(&mut seen[j], true) {
            return Err(data_error(features_path, format!("duplicate feature row for user {u}")));
        }
        features.row_mut(j).assign(&ndarray::ArrayView1::from(&values));
    }
    if let Some(j) = seen.iter().position(|s| !s) {
        return Err(data_error(features_path, format!("user {} has ratings but no features", user_ids[j])));
    }

    InteractionDataset::new(ratings, features, user_ids, item_ids)
}

/// Paths of a ratings/features file pair.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct InteractionFiles {
    pub ratings: PathBuf,
    pub features: PathBuf,
}
