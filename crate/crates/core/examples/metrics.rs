//! Scores a few answer pairs with every metric.

use cpc::metrics::{edit_similarity, keyword_recall, rouge_l, token_f1};

fn main() -> cpc::Result<()> {
    let pairs = [
        ("The tower was finished in 1889.", "It was finished in 1889"),
        ("Gustave Eiffel", "the Eiffel company"),
        ("Paris", "London"),
    ];
    println!("{:<34} {:<26} {:>7} {:>7} {:>7}", "reference", "hypothesis", "rougeL", "F1", "edit");
    for (r, h) in pairs {
        println!(
            "{r:<34} {h:<26} {:>7.4} {:>7.4} {:>7.4}",
            rouge_l(r, h).score,
            token_f1(r, h).score,
            edit_similarity(r, h).score
        );
    }
    let gold = ["Eiffel", "1889", "Paris"];
    let found = ["1889", "paris", "tower"];
    println!("\nkeyword recall {:.4}", keyword_recall(&gold, &found)?.score);
    Ok(())
}
