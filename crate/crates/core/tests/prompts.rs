use counterfax_core::alphabet::PermutedAlphabet;
use counterfax_core::generate::problem_from_params;
use counterfax_core::harness::{build_prompt, PromptMode, DEFAULT_SYSTEM_MESSAGE};
use counterfax_core::{AnalogyProblem, IntervalSize, SideParams, TransformationType};

const PLAIN: &str = include_str!("golden/plain_prompt.txt");
const TOOL: &str = include_str!("golden/tool_prompt.txt");
const TOOL_INTERVAL2: &str = include_str!("golden/tool_prompt_interval2.txt");

fn successor(interval: IntervalSize, source: usize, target: usize) -> AnalogyProblem {
    problem_from_params(
        &PermutedAlphabet::hw(),
        TransformationType::Successor,
        interval,
        SideParams::at(source),
        SideParams::at(target),
        "golden".into(),
        0,
    )
    .unwrap()
}

#[test]
fn plain_prompt_matches_golden_file() {
    let p = successor(IntervalSize::ONE, 0, 10);
    let msgs = build_prompt(&p, &PermutedAlphabet::hw(), PromptMode::Plain);
    assert_eq!(msgs.len(), 2);
    assert_eq!(msgs[0].role, "system");
    assert_eq!(msgs[0].content, DEFAULT_SYSTEM_MESSAGE);
    assert_eq!(msgs[1].role, "user");
    assert_eq!(msgs[1].content, PLAIN);
    assert!(msgs[1].content.contains("[j r q a] [ ? ]"));
    assert!(msgs[1].content.ends_with("Answer:"));
}

#[test]
fn tool_prompt_matches_golden_file() {
    let p = successor(IntervalSize::ONE, 0, 10);
    let msgs = build_prompt(&p, &PermutedAlphabet::hw(), PromptMode::ToolAugmented);
    assert_eq!(msgs.len(), 1);
    assert_eq!(msgs[0].role, "user");
    assert_eq!(msgs[0].content, TOOL);
}

#[test]
fn interval_two_tool_prompt() {
    let p = successor(IntervalSize::TWO, 12, 3);
    let msgs = build_prompt(&p, &PermutedAlphabet::hw(), PromptMode::ToolAugmented);
    assert_eq!(msgs[0].content, TOOL_INTERVAL2);
    assert!(msgs[0].content.contains("[q a h v] [q a h m]\n[k w b f] [ ? ]"));
}

#[test]
fn alphabet_line_follows_problem_alphabet() {
    let alt = PermutedAlphabet::alt();
    let p = problem_from_params(
        &alt,
        TransformationType::Sort,
        IntervalSize::ONE,
        SideParams::at(0).with_swap(1, 3),
        SideParams::at(8).with_swap(0, 4),
        "alt".into(),
        0,
    )
    .unwrap();
    for mode in [PromptMode::Plain, PromptMode::ToolAugmented] {
        let msgs = build_prompt(&p, &alt, mode);
        let text = &msgs.last().unwrap().content;
        assert!(text.contains(&format!("[{}]", alt.to_line())), "{text}");
    }
}
