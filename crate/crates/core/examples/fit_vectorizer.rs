//! Fits a TF-IDF vectorizer on a corpus file and writes it as JSON.
//!
//! cargo run -p fred --example fit_vectorizer -- data/sentiment.jsonl data/vectorizer.json

use std::path::PathBuf;

use fred::text::{Corpus, TfIdfVectorizer};

fn main() -> fred::Result<()> {
    let mut args = std::env::args_os().skip(1).map(PathBuf::from);
    let (Some(corpus), Some(out)) = (args.next(), args.next()) else {
        eprintln!("usage: fit_vectorizer CORPUS OUT");
        std::process::exit(2);
    };
    let vectorizer = TfIdfVectorizer::fit(&Corpus::load(&corpus)?)?;
    vectorizer.save(&out)?;
    println!("{} terms written to {}", vectorizer.dim(), out.display());
    Ok(())
}
