//! Shows how raw columns become binary literals: quantile thresholds with
//! their complements for numeric columns, one-hot tests for categories.
//!
//! cargo run --example binarize_table

use glrm::binarizer::{binarize, build_dictionary};
use glrm::datatable::{read_csv, target_mode};
use glrm::Family;

const CSV: &str = "\
age,colour,income,label
23,red,31000,no
35,blue,52000,yes
47,red,?,yes
52,green,61000,yes
19,blue,12000,no
31,,45000,no
64,green,70000,yes
28,red,38000,no
";

fn main() -> glrm::Result<()> {
    let (table, target) = read_csv(CSV.as_bytes(), "label")?;
    let targets = target_mode(&target, Family::Logistic)?;
    let dict = build_dictionary(&table, 3)?;
    let data = binarize(&table, &dict, &targets, true)?;

    for (j, f) in dict.features.iter().enumerate() {
        let bits: String = (0..data.n_rows()).map(|i| if data.bit(i, j) { '1' } else { '0' }).collect();
        let comp = dict.complement_of[j].map_or(String::from("-"), |c| c.to_string());
        let basis = if dict.singleton_basis.contains(&j) { "*" } else { " " };
        println!("{j:>2}{basis} {:<22} {bits}  complement {comp}", f.display);
    }
    println!("exclusion groups: {:?}", dict.exclusion_groups);
    if let Some(block) = data.numeric_raw() {
        for (m, col) in block.source_columns.iter().enumerate() {
            let z: Vec<String> = block.values[m].iter().map(|v| format!("{v:+.2}")).collect();
            println!("z({}) = {}", dict.columns[*col].name, z.join(" "));
        }
    }
    Ok(())
}
