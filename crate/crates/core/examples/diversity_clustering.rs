//! Offline diversity selection: average-linkage clustering of a corpus
//! into as many groups as the budget, keeping the document nearest each
//! cluster mean.

use oris::corpus::{generate_synthetic, LabelSpace};
use oris::harness::diversity_select;

fn main() -> oris::Result<()> {
    let labels = LabelSpace::numbered(3)?;
    let docs = generate_synthetic(&labels, &[60, 30, 10], 3, 6.0, 4)?;
    for budget in [3, 6, 12] {
        let picked = diversity_select(&docs, budget, 5000)?;
        let mut per_class = [0usize; 3];
        for &id in &picked {
            per_class[docs[id].true_class] += 1;
        }
        println!("budget {budget:>2}: picked ids {picked:?}\n            per class {per_class:?}");
    }
    Ok(())
}
