//! A tour of the rules engine: legality, superko, scoring, and pass-alive
//! life.
//!
//!     cargo run --example rules_tour

use deskgo::rules::{
    pass_alive_vertices, score_tromp_taylor, BoardState, Color, Move, Vertex, DEFAULT_KOMI,
};

fn diagram(state: &BoardState) -> String {
    let size = state.size();
    let mut out = String::new();
    for row in 0..size {
        for col in 0..size {
            out.push(match state.stone(Vertex::new(row, col)) {
                Some(Color::Black) => 'X',
                Some(Color::White) => 'O',
                None => '.',
            });
            out.push(' ');
        }
        out.push('\n');
    }
    out
}

fn play(state: &BoardState, moves: &[(usize, usize)]) -> BoardState {
    let mut s = state.clone();
    for &(row, col) in moves {
        s = s.apply_move(Move::Play(Vertex::new(row, col))).unwrap();
    }
    s
}

fn main() {
    // Every game starts from an empty board; Black moves first and komi
    // compensates White.
    let empty = BoardState::new(5, DEFAULT_KOMI);
    println!(
        "new 5x5 board: {} legal moves for {:?} (25 vertices + pass)",
        empty.legal_moves().unwrap().len(),
        empty.to_move()
    );

    // Basic legality: occupied vertices and suicide are rejected.
    let s = play(&empty, &[(0, 1), (1, 0)]);
    println!("\nposition after B(0,1), W(1,0):\n{}", diagram(&s));
    let occupied = s.apply_move(Move::Play(Vertex::new(0, 1)));
    println!("playing on an occupied vertex: {:?}", occupied.unwrap_err());
    // The corner join is legal even though (0,0) itself touches no empty
    // vertex: the merged chain still breathes at (0,2) and (1,1).
    let corner = s.apply_move(Move::Play(Vertex::new(0, 0))).unwrap();
    println!("B(0,0) joins the corner chain legally:\n{}", diagram(&corner));
    // A stone with no liberties that captures nothing is suicide: after
    // B(0,1) and B(1,0), the corner is poison for White.
    let trap = play(&empty, &[(0, 1), (4, 4), (1, 0)]);
    let suicide = trap.apply_move(Move::Play(Vertex::new(0, 0)));
    println!("W(0,0) into the surrounded corner: {:?}", suicide.unwrap_err());

    // Positional superko: recreating any earlier whole-board position is
    // illegal, which kills single-stone ko cycles outright.
    let ko = play(
        &empty,
        &[
            (4, 1), // B
            (4, 2), // W
            (3, 0), // B
            (3, 1), // W
            (4, 3), // B
            (4, 0), // W captures B(4,1)
        ],
    );
    println!("ko position (White just captured at the corner):\n{}", diagram(&ko));
    let recapture = ko.apply_move(Move::Play(Vertex::new(4, 1)));
    println!("immediate recapture: {:?}", recapture.unwrap_err());

    // Tromp-Taylor scoring: stones plus territory that reaches only one
    // color. Build a clean partition: Black owns the left, White the right.
    let mut split = empty.clone();
    for row in 0..5 {
        split = play(&split, &[(row, 1), (row, 3)]);
    }
    let finished = split
        .apply_move(Move::Pass)
        .unwrap()
        .apply_move(Move::Pass)
        .unwrap();
    println!("two passes end the game:\n{}", diagram(&finished));
    let score = score_tromp_taylor(&finished);
    println!(
        "black {} (5 stones + 5 territory), white {} (5 + 5 + komi {}), so {:?} wins by {}",
        score.black,
        score.white,
        finished.komi(),
        score.winner,
        score.margin
    );
    println!("the middle column reaches both colors, so it counts for neither");

    // Benson's algorithm: a corner group with two one-point eyes can never
    // be captured, even if its owner passes forever.
    let mut fortress = BoardState::new(7, DEFAULT_KOMI);
    for (row, col) in [(1, 0), (0, 1), (1, 1), (1, 2), (1, 3), (0, 3)] {
        fortress = fortress
            .apply_move(Move::Play(Vertex::new(row, col)))
            .unwrap()
            .apply_move(Move::Pass)
            .unwrap();
    }
    println!("two-eyed corner group on 7x7:\n{}", diagram(&fortress));
    let alive = pass_alive_vertices(&fortress, Color::Black);
    println!(
        "pass-alive vertices for Black: {:?}",
        alive.iter().map(|v| (v.row, v.col)).collect::<Vec<_>>()
    );
    println!("(the six stones plus both eyes at (0,0) and (0,2))");

    // Remove one eye and the group stops being unconditionally alive.
    let mut one_eye = BoardState::new(7, DEFAULT_KOMI);
    for (row, col) in [(0, 1), (1, 0), (1, 1)] {
        one_eye = one_eye
            .apply_move(Move::Play(Vertex::new(row, col)))
            .unwrap()
            .apply_move(Move::Pass)
            .unwrap();
    }
    println!(
        "one-eyed corner group: pass-alive set is {:?} (White can fill from outside eventually)",
        pass_alive_vertices(&one_eye, Color::Black)
    );
}
