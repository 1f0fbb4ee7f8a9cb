//! Prompt-evolution request templates. `{given_math_question}` marks the seed.

/// Rewrites a seed into a more diverse question.
pub const BREADTH_TEMPLATE: &str = r#"You are a good math question creator.

Your objective is to draw inspiration from the #Given MATH Question# to create a 
brand new math question. This new math question should be distinctly different from 
the #Given MATH Question# and be even more unique.

The length and difficulty level of the #Created MATH Question# should be similar to 
those of the #Given MATH Question#.

The #Created MATH Question# must be solvable and understandable by humans.

#Given MATH Question#:
{given_math_question}

#Created MATH Question#:
"#;

/// Rewrites a seed into a harder question.
pub const DEPTH_TEMPLATE: &str = r#"You are a good math question creator.

Your objective is to draw inspiration from the #Given MATH Question# to create a 
brand new math question. This new math question should be more complex and 
challenging than the #Given MATH Question#.

The #Created MATH Question# must be solvable and understandable by humans.

#Given MATH Question#:
{given_math_question}

#Created MATH Question#:
"#;

/// Rewrites a seed by adding constraints. Disabled unless explicitly enabled.
pub const CONSTRAINTS_TEMPLATE: &str = r#"You are a good math question creator.

Your objective is to rewrite the #Given MATH Question# into a brand new but more 
complex version. You can complicate the #Given MATH Question# by introducing 
additional constraints and requirements.

The #Created MATH Question# must be solvable and understandable by humans.

#Given MATH Question#:
{given_math_question}

#Created MATH Question#:
"#;

pub const SEED_SLOT: &str = "{given_math_question}";

/// Everything before and including this marker is stripped from replies.
pub const CREATED_MARKER: &str = "#Created MATH Question#:";

/// Appended to every solution request.
pub const STEP_BY_STEP_INSTRUCTION: &str =
    "Please reason step by step, and put your final answer within \\boxed{}.";
