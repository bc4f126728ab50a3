use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use crate::dataset::HardLabelMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bag {
    pub snippet_ids: Vec<usize>,
    pub label: u8,
}

fn draw<R: Rng + ?Sized>(pool: &[usize], c: usize, rng: &mut R) -> Vec<usize> {
    if pool.len() >= c {
        index::sample(rng, pool.len(), c).into_iter().map(|i| pool[i]).collect()
    } else {
        (0..c).map(|_| pool[rng.gen_range(0..pool.len())]).collect()
    }
}

/// Draws one positive bag from the 1-labelled pool and one negative bag from
/// the 0-labelled pool, `c` snippets each. Sampling is without replacement
/// when the pool holds at least `c` snippets, with replacement otherwise.
pub fn sample_bags<R: Rng + ?Sized>(labels: &HardLabelMap, c: usize, rng: &mut R) -> Result<(Bag, Bag)> {
    let pos = labels.pool(1);
    let neg = labels.pool(0);
    if pos.is_empty() {
        return Err(Error::EmptyPool("positive"));
    }
    if neg.is_empty() {
        return Err(Error::EmptyPool("negative"));
    }
    let positive = Bag { snippet_ids: draw(&pos, c, rng), label: 1 };
    let negative = Bag { snippet_ids: draw(&neg, c, rng), label: 0 };
    Ok((positive, negative))
}
