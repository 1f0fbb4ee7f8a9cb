//! Extract boxed answers, canonicalize them, and grade against a reference.
//!
//!     cargo run --example grade_answers

use mathcurate::{answers_equivalent, extract_boxed, grade_response, parse_answer};

fn main() {
    let reference = parse_answer("\\frac{1}{2}").expect("reference parses");
    let responses = [
        "Half of the pie is left, so the answer is \\boxed{0.5}.",
        "We get 2/4, which reduces: \\boxed{\\dfrac{1}{2}}",
        "The answer is \\boxed{50\\%}.",
        "I think it is \\boxed{\\frac{2}{3}}.",
        "The answer is one half.",
    ];
    for text in responses {
        let boxed = extract_boxed(text).unwrap_or_else(|| "-".into());
        println!("{:<12} {:<16} {}", format!("{:?}", grade_response(text, &reference)), boxed, text);
    }

    println!();
    for (a, b) in [("1e-5", "1\\times10^{-5}"), ("(1, 2)", "\\left(1,2\\right)"), ("1,000", "1000"), ("3/4", "0.7")] {
        let (x, y) = (parse_answer(a).unwrap(), parse_answer(b).unwrap());
        println!("{a:>16} == {b:<18} {}   (canonical: {x} / {y})", answers_equivalent(&x, &y));
    }
}
