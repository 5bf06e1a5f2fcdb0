use rakugo_pipeline::SimulatedListening;
use rakugo_stats::{normalize_scores, Question, REFERENCE_SYSTEM};

fn systems() -> Vec<String> {
    ["AbS", "SA-Tacotron", "Tacotron"].map(String::from).to_vec()
}

#[test]
fn design_covers_every_listener_story_question_once() {
    let sim = SimulatedListening::ranked(&systems(), 12, 6, 3);
    let table = sim.generate().unwrap();
    assert_eq!(table.len(), 12 * 6 * 4);
    assert_eq!(table.listeners().len(), 12);
    assert_eq!(table.systems(), vec!["AbS", "SA-Tacotron", "Tacotron"]);
    assert!(table.records().iter().all(|r| (1.0..=5.0).contains(&r.score) && r.score.fract() == 0.0));
    assert_eq!(sim.generate().unwrap(), table);
}

#[test]
fn ranking_survives_normalization() {
    let table = SimulatedListening::ranked(&systems(), 30, 6, 4).generate().unwrap();
    let norm = normalize_scores(&table).unwrap();
    let means = norm.system_means(Question::Q1);
    assert!(means[REFERENCE_SYSTEM] > means["SA-Tacotron"]);
    assert!(means["SA-Tacotron"] > means["Tacotron"]);
}

#[test]
fn empty_design_is_refused() {
    assert!(SimulatedListening::ranked(&[], 3, 3, 0).generate().is_err());
    assert!(SimulatedListening::ranked(&systems(), 0, 3, 0).generate().is_err());
}
