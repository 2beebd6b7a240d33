//! Records a serve-check fixture from a built-in model: the class names and
//! the probabilities it assigns to a few corpus texts.
//!
//! cargo run -p fred --example record_fixture -- data/sentiment_model.json data/vectorizer.json data/sentiment.jsonl data/serve_fixture.json

use std::path::PathBuf;

use fred::predictor::load_builtin;
use fred::text::{tokenize, Corpus};
use fred::{Error, Prediction};

const TEXTS: usize = 8;

fn main() -> fred::Result<()> {
    let mut args = std::env::args_os().skip(1).map(PathBuf::from);
    let (Some(model), Some(vectorizer), Some(corpus), Some(out)) = (args.next(), args.next(), args.next(), args.next())
    else {
        eprintln!("usage: record_fixture MODEL VECTORIZER CORPUS OUT");
        std::process::exit(2);
    };
    let model = load_builtin(&model, Some(&vectorizer))?;
    let classes = model
        .class_names()
        .ok_or_else(|| Error::config("the model has no class names"))?;
    let mut texts: Vec<String> = Corpus::load(&corpus)?
        .documents()
        .iter()
        .take(TEXTS)
        .map(|d| d.detokenize())
        .collect();
    texts.push("nothing in this sentence is known".to_string());
    let docs: Vec<_> = texts.iter().map(|t| tokenize(t)).collect();
    let probabilities = model
        .predict_batch(&docs)?
        .into_iter()
        .map(|p| match p {
            Prediction::Probabilities(row) => Ok(row),
            Prediction::Value(_) => Err(Error::config("the model does not output probabilities")),
        })
        .collect::<fred::Result<Vec<_>>>()?;
    let fixture = serde_json::json!({
        "classes": classes,
        "request": { "texts": texts },
        "response": { "probabilities": probabilities },
    });
    let content = serde_json::to_string_pretty(&fixture)? + "\n";
    std::fs::write(&out, content).map_err(|e| Error::config(format!("{}: {e}", out.display())))?;
    println!("{} texts written to {}", texts.len(), out.display());
    Ok(())
}
