//! The 36-item Working Alliance Inventory and its signed key table.
//!
//! The inventory is data: [`default_inventory`] parses a bundled JSON file, and
//! any file with the same schema (36 items, 12 per scale) can replace it.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Speaker;

pub const ITEM_COUNT: usize = 36;
pub const ITEMS_PER_SCALE: usize = 12;

const DEFAULT_JSON: &str = include_str!("../data/wai_default.json");

#[derive(Error, Debug)]
pub enum InventoryError {
    #[error("expected {ITEM_COUNT} items, found {0}")]
    ItemCount(usize),
    #[error("scale {scale} has {count} items, expected {ITEMS_PER_SCALE}")]
    ScaleCount { scale: Scale, count: usize },
    #[error("item ids must be 1..=36 in order; position {position} holds id {id}")]
    ItemOrder { position: usize, id: usize },
    #[error("item {id}: sign must be +1 or -1, found {sign}")]
    BadSign { id: usize, sign: i32 },
    #[error("similarity vector has length {0}, expected {ITEM_COUNT}")]
    Length(usize),
    #[error("similarity entry {0} is not finite")]
    NonFinite(usize),
    #[error("inventory JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scale {
    Task,
    Bond,
    Goal,
}

impl Scale {
    pub const ALL: [Scale; 3] = [Scale::Task, Scale::Bond, Scale::Goal];

    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Task => "task",
            Scale::Bond => "bond",
            Scale::Goal => "goal",
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Task => "TASK",
            Scale::Bond => "BOND",
            Scale::Goal => "GOAL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InventoryItem {
    pub item_id: usize,
    pub scale: Scale,
    pub sign: i32,
    pub client_text: String,
    pub therapist_text: String,
}

impl InventoryItem {
    /// Item wording for the given respondent role.
    pub fn text_for(&self, speaker: Speaker) -> &str {
        match speaker {
            Speaker::Patient => &self.client_text,
            Speaker::Therapist => &self.therapist_text,
        }
    }
}

/// 36×3 signed membership matrix, stored per item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyTable {
    rows: [[i8; 3]; ITEM_COUNT],
}

impl KeyTable {
    pub fn from_items(items: &[InventoryItem]) -> Self {
        let mut rows = [[0i8; 3]; ITEM_COUNT];
        for (row, item) in rows.iter_mut().zip(items) {
            row[item.scale as usize] = item.sign as i8;
        }
        Self { rows }
    }

    /// Entry for item position `j` (0-based) and `scale`.
    pub fn entry(&self, j: usize, scale: Scale) -> i8 {
        self.rows[j][scale as usize]
    }

    /// Signed indicator vector of one scale over the 36 items.
    pub fn column(&self, scale: Scale) -> [i8; ITEM_COUNT] {
        let mut out = [0i8; ITEM_COUNT];
        for (o, r) in out.iter_mut().zip(&self.rows) {
            *o = r[scale as usize];
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScaleScores {
    pub task: f64,
    pub bond: f64,
    pub goal: f64,
    pub full: f64,
}

impl ScaleScores {
    pub fn get(&self, scale: Scale) -> f64 {
        match scale {
            Scale::Task => self.task,
            Scale::Bond => self.bond,
            Scale::Goal => self.goal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inventory {
    pub items: Vec<InventoryItem>,
    pub key: KeyTable,
}

impl Inventory {
    pub fn from_items(items: Vec<InventoryItem>) -> Result<Self, InventoryError> {
        validate(&items)?;
        let key = KeyTable::from_items(&items);
        Ok(Self { items, key })
    }

    pub fn from_json(text: &str) -> Result<Self, InventoryError> {
        Self::from_items(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, InventoryError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.items).expect("inventory serializes")
    }

    pub fn texts(&self, speaker: Speaker) -> impl Iterator<Item = &str> {
        self.items.iter().map(move |i| i.text_for(speaker))
    }
}

fn validate(items: &[InventoryItem]) -> Result<(), InventoryError> {
    if items.len() != ITEM_COUNT {
        return Err(InventoryError::ItemCount(items.len()));
    }
    for (position, item) in items.iter().enumerate() {
        if item.item_id != position + 1 {
            return Err(InventoryError::ItemOrder {
                position,
                id: item.item_id,
            });
        }
        if item.sign != 1 && item.sign != -1 {
            return Err(InventoryError::BadSign {
                id: item.item_id,
                sign: item.sign,
            });
        }
    }
    for scale in Scale::ALL {
        let count = items.iter().filter(|i| i.scale == scale).count();
        if count != ITEMS_PER_SCALE {
            return Err(InventoryError::ScaleCount { scale, count });
        }
    }
    Ok(())
}

/// The bundled WAI inventory (client wording per the published table, therapist
/// wording by role substitution).
pub fn default_inventory() -> Inventory {
    Inventory::from_json(DEFAULT_JSON).expect("bundled inventory is valid")
}

/// Signed sum of item similarities per scale; `full` is the sum of the three.
pub fn aggregate_scales(sim: &[f64], key: &KeyTable) -> Result<ScaleScores, InventoryError> {
    if sim.len() != ITEM_COUNT {
        return Err(InventoryError::Length(sim.len()));
    }
    if let Some(j) = sim.iter().position(|x| !x.is_finite()) {
        return Err(InventoryError::NonFinite(j));
    }
    let mut acc = [0f64; 3];
    for (j, &s) in sim.iter().enumerate() {
        for (a, &k) in acc.iter_mut().zip(&key.rows[j]) {
            if k != 0 {
                *a += f64::from(k) * s;
            }
        }
    }
    let [task, bond, goal] = acc;
    Ok(ScaleScores {
        task,
        bond,
        goal,
        full: task + bond + goal,
    })
}
