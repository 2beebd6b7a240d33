//! Terminal and HTML views of an explanation: token saliency, the minimal
//! subset and the nearest counterfactuals.

use std::fmt::Write;

use crate::explainer::Explanation;

/// Score divided by the largest absolute score, in `[-1, 1]`; 0 when
/// undefined or when every score is 0.
pub fn intensities(scores: &[Option<f64>]) -> Vec<f64> {
    let max = scores.iter().flatten().fold(0.0f64, |m, s| m.max(s.abs()));
    scores
        .iter()
        .map(|s| match s {
            Some(s) if max > 0.0 => s / max,
            _ => 0.0,
        })
        .collect()
}

/// Background color for an intensity: white to green for positive, white
/// to red for negative.
pub fn rgb(intensity: f64) -> (u8, u8, u8) {
    let t = intensity.abs().clamp(0.0, 1.0);
    let fade = |full: f64| (255.0 - (255.0 - full) * t).round() as u8;
    if intensity >= 0.0 {
        (fade(0.0), fade(140.0), fade(0.0))
    } else {
        (fade(200.0), fade(0.0), fade(0.0))
    }
}

fn subset_sentence(e: &Explanation) -> String {
    let words = e.subset_words();
    let target = e.class_name(e.target_class);
    match &e.minimal_subset {
        None => "No candidate was absent from any sample.".to_string(),
        Some(c) if e.threshold_met => format!(
            "Removing {{{}}} drops the confidence in class {target} by {:.3} on average (threshold {:.3}).",
            words.join(", "),
            c.drop,
            e.threshold
        ),
        Some(c) => format!(
            "No subset of at most {} tokens reaches the threshold {:.3}; the largest drop, {:.3}, comes from removing {{{}}}.",
            e.config.sampling.l_max,
            e.threshold,
            c.drop,
            words.join(", ")
        ),
    }
}

fn ansi_token(out: &mut String, token: &str, intensity: f64) {
    let (r, g, b) = rgb(intensity);
    let fg = if intensity.abs() > 0.55 { "97" } else { "30" };
    let _ = write!(out, "\x1b[{fg};48;2;{r};{g};{b}m{token}\x1b[0m");
}

/// Saliency line, subset sentence and counterfactuals with ANSI colors.
pub fn ansi(e: &Explanation) -> String {
    let mut out = String::new();
    let levels = intensities(&e.scores);
    out.push_str("Token scores\n  ");
    for (i, (token, &t)) in e.document.tokens().iter().zip(&levels).enumerate() {
        if i > 0 {
            out.push(' ');
        }
        ansi_token(&mut out, token, t);
    }
    out.push_str("\n\nMinimal subset\n  ");
    out.push_str(&subset_sentence(e));
    out.push_str("\n\nCounterfactuals\n");
    if e.counterfactuals.is_empty() {
        out.push_str("  none found\n");
    }
    for c in &e.counterfactuals {
        out.push_str("  ");
        for (i, token) in c.document.tokens().iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            if c.perturbed.binary_search(&i).is_ok() {
                let _ = write!(out, "\x1b[30;48;2;255;165;0m{token}\x1b[0m");
            } else {
                out.push_str(token);
            }
        }
        let _ = writeln!(out, "  -> {}", e.class_name(c.class));
    }
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Self-contained HTML page with inline styles only.
pub fn html(e: &Explanation) -> String {
    let mut out = String::new();
    out.push_str(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Explanation</title>\n</head>\n\
         <body style=\"font-family: sans-serif; max-width: 60em; margin: 2em auto; line-height: 1.8;\">\n",
    );
    out.push_str("<h2>Token scores</h2>\n<p>");
    let levels = intensities(&e.scores);
    for (i, (token, &t)) in e.document.tokens().iter().zip(&levels).enumerate() {
        let (r, g, b) = rgb(t);
        let color = if t.abs() > 0.55 { "#fff" } else { "#000" };
        let title = match e.scores[i] {
            Some(s) => format!("{s:.4}"),
            None => "undefined".to_string(),
        };
        let _ = write!(
            out,
            "<span title=\"{title}\" style=\"background: rgb({r}, {g}, {b}); color: {color}; padding: 0.1em 0.25em; border-radius: 3px;\">{}</span> ",
            escape(token)
        );
    }
    out.push_str("</p>\n<h2>Minimal subset</h2>\n<p>");
    out.push_str(&escape(&subset_sentence(e)));
    out.push_str("</p>\n<h2>Counterfactuals</h2>\n");
    if e.counterfactuals.is_empty() {
        out.push_str("<p>none found</p>\n");
    } else {
        out.push_str("<ol>\n");
        for c in &e.counterfactuals {
            out.push_str("<li>");
            for (i, token) in c.document.tokens().iter().enumerate() {
                if c.perturbed.binary_search(&i).is_ok() {
                    let _ = write!(
                        out,
                        "<span style=\"color: #e67300; font-weight: bold;\">{}</span> ",
                        escape(token)
                    );
                } else {
                    let _ = write!(out, "{} ", escape(token));
                }
            }
            let _ = writeln!(out, "&rarr; {}</li>", escape(&e.class_name(c.class)));
        }
        out.push_str("</ol>\n");
    }
    out.push_str("</body>\n</html>\n");
    out
}
