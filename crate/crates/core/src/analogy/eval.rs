use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::lrcos::{LrCosConfig, LrCosSolver};
use super::solvers::{solve_3cosadd, solve_3cosmul, solve_pairdistance, AnalogySpace, CandidatePolicy, Candidates};
use super::{generate_questions, AnalogyCategory, AnalogyQuestion};
use crate::embedding::Embedding;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolverKind {
    #[serde(rename = "3cosadd")]
    ThreeCosAdd,
    #[serde(rename = "3cosmul")]
    ThreeCosMul,
    #[serde(rename = "pairdist")]
    PairDistance,
    #[serde(rename = "lrcos")]
    LrCos,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::ThreeCosAdd,
        SolverKind::ThreeCosMul,
        SolverKind::PairDistance,
        SolverKind::LrCos,
    ];
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::ThreeCosAdd => "3cosadd",
            SolverKind::ThreeCosMul => "3cosmul",
            SolverKind::PairDistance => "pairdist",
            SolverKind::LrCos => "lrcos",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "3cosadd" => Ok(SolverKind::ThreeCosAdd),
            "3cosmul" => Ok(SolverKind::ThreeCosMul),
            "pairdist" | "pairdistance" => Ok(SolverKind::PairDistance),
            "lrcos" => Ok(SolverKind::LrCos),
            other => Err(Error::InvalidArgument(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub solver: SolverKind,
    pub candidates: CandidatePolicy,
    pub lrcos: LrCosConfig,
    pub keep_per_question: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            solver: SolverKind::LrCos,
            candidates: CandidatePolicy::FullVocabulary,
            lrcos: LrCosConfig::default(),
            keep_per_question: false,
        }
    }
}

impl EvalConfig {
    pub fn with_solver(solver: SolverKind) -> Self {
        EvalConfig {
            solver,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionOutcome {
    pub question: AnalogyQuestion,
    /// `None` when the solver could not answer (degenerate question).
    pub predicted: Option<String>,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub accuracy: f64,
    pub answered: usize,
    pub correct: usize,
    pub skipped_oov: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_question: Option<Vec<QuestionOutcome>>,
}

impl SolverResult {
    /// Questions generated for the category, answered or not.
    pub fn total(&self) -> usize {
        self.answered + self.skipped_oov
    }
}

/// Accuracy of one solver over every question the category generates in
/// the embedding's language. Questions touching out-of-vocabulary words are
/// skipped and counted in `skipped_oov`, never scored as wrong.
pub fn category_accuracy(
    embedding: &Embedding,
    category: &AnalogyCategory,
    config: &EvalConfig,
) -> Result<SolverResult> {
    let questions = generate_questions(category, embedding.language())?;
    let space = AnalogySpace::new(embedding)?;
    let candidates = Candidates::resolve(&config.candidates, embedding);
    let lrcos = match config.solver {
        SolverKind::LrCos => Some(LrCosSolver::new(&space, category, config.lrcos.clone())?),
        _ => None,
    };

    let answerable = |q: &AnalogyQuestion| [&q.a, &q.b, &q.c, &q.gold].iter().all(|w| embedding.contains(w));
    let (covered, skipped): (Vec<&AnalogyQuestion>, Vec<&AnalogyQuestion>) =
        questions.iter().partition(|q| answerable(q));
    if covered.is_empty() {
        return Err(Error::NoAnswerableQuestions(category.name().to_string()));
    }

    let outcomes = covered
        .par_iter()
        .map(|q| {
            let answer = match config.solver {
                SolverKind::ThreeCosAdd => solve_3cosadd(&space, q, &candidates),
                SolverKind::ThreeCosMul => solve_3cosmul(&space, q, &candidates),
                SolverKind::PairDistance => solve_pairdistance(&space, q, &candidates),
                SolverKind::LrCos => lrcos.as_ref().expect("built above").solve(q, &candidates),
            };
            let predicted = match answer {
                Ok(token) => Some(token),
                Err(Error::DegenerateQuestion) => None,
                Err(e) => return Err(e),
            };
            let correct = predicted.as_deref() == Some(q.gold.as_str());
            Ok(((*q).clone(), predicted, correct))
        })
        .collect::<Result<Vec<_>>>()?;

    let correct = outcomes.iter().filter(|o| o.2).count();
    let answered = outcomes.len();
    Ok(SolverResult {
        accuracy: correct as f64 / answered as f64,
        answered,
        correct,
        skipped_oov: skipped.len(),
        per_question: config.keep_per_question.then(|| {
            outcomes
                .into_iter()
                .map(|(question, predicted, correct)| QuestionOutcome {
                    question,
                    predicted,
                    correct,
                })
                .collect()
        }),
    })
}
