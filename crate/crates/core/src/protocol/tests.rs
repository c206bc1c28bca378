use super::*;
use crate::engine::PlayerId;
use crate::world::Direction;

fn allowed(session: &Session, phase: Option<PhaseHint>, payload: Payload, seq: u64) -> Legality {
    legal_in_session(session, phase, &WireMessage::new(seq, payload))
}

fn admin_game(code: &str, token: &str) -> AdminGame {
    AdminGame { game_code: code.into(), admin_token: token.into() }
}

#[test]
fn move_spelling_is_lowercase() {
    let bytes = encode_message(&WireMessage::new(3, Move { dir: Direction::Up }));
    assert_eq!(bytes, br#"{"type":"move","seq":3,"payload":{"dir":"up"}}"#);
}

#[test]
fn canonical_bytes_round_trip() {
    let raw = br#"{"type":"join","seq":1,"payload":{"gameCode":"ABCDEF","name":"ana"}}"#;
    let m = decode_message(raw).unwrap();
    assert_eq!(m.payload, Payload::Join(Join { game_code: "ABCDEF".into(), name: "ana".into() }));
    assert_eq!(encode_message(&m), raw);
}

#[test]
fn bad_enum_value_names_the_field() {
    let err = decode_message(br#"{"type":"move","seq":1,"payload":{"dir":"north"}}"#).unwrap_err();
    match err {
        DecodeError::SchemaViolation { field, .. } => assert_eq!(field, "payload.dir"),
        e => panic!("{e:?}"),
    }
}

#[test]
fn unknown_type_and_not_json() {
    assert_eq!(
        decode_message(br#"{"type":"warp","seq":1,"payload":{}}"#),
        Err(DecodeError::UnknownType("warp".into()))
    );
    assert_eq!(decode_message(b"\x00\x01garbage"), Err(DecodeError::NotJson));
    assert!(matches!(
        decode_message(br#"{"type":"interact","payload":{}}"#),
        Err(DecodeError::SchemaViolation { field, .. }) if field == "seq"
    ));
    assert!(matches!(
        decode_message(br#"{"type":"interact","seq":-1,"payload":{}}"#),
        Err(DecodeError::SchemaViolation { field, .. }) if field == "seq"
    ));
    assert!(matches!(decode_message(br#"[1,2]"#), Err(DecodeError::SchemaViolation { .. })));
}

#[test]
fn missing_and_mistyped_fields() {
    assert!(matches!(
        decode_message(br#"{"type":"join","seq":1,"payload":{"name":"x"}}"#),
        Err(DecodeError::SchemaViolation { field, .. }) if field == "payload"
    ));
    assert!(matches!(
        decode_message(br#"{"type":"select_team","seq":1,"payload":{"team":"1"}}"#),
        Err(DecodeError::SchemaViolation { field, .. }) if field == "payload.team"
    ));
}

#[test]
fn extra_fields_are_ignored() {
    let m =
        decode_message(br#"{"type":"select_team","seq":9,"extra":true,"payload":{"team":1,"colour":"red"}}"#).unwrap();
    assert_eq!(m, WireMessage::new(9, SelectTeam { team: 1 }));
}

#[test]
fn nested_violation_in_submission() {
    let raw = br#"{"type":"answer","seq":2,"payload":{"taskId":"T1","submission":{"type":"numeric","value":"x"}}}"#;
    assert!(matches!(decode_message(raw), Err(DecodeError::SchemaViolation { .. })));
}

#[test]
fn player_cannot_send_admin_types() {
    let session =
        Session { role: SessionRole::Player { player_id: PlayerId(1), game_code: "ABCDEF".into() }, last_seq: Some(1) };
    assert_eq!(
        allowed(&session, None, Payload::AdminEnd(admin_game("ABCDEF", "t")), 2),
        Legality::Rejected(Rejection::Role)
    );
    assert_eq!(allowed(&session, Some(PhaseHint::Running), Interact {}.into(), 2), Legality::Allowed);
    assert_eq!(allowed(&session, Some(PhaseHint::Lobby), Interact {}.into(), 2), Legality::Rejected(Rejection::Phase));
    assert_eq!(
        allowed(&session, None, Join { game_code: "X".into(), name: "y".into() }.into(), 2),
        Legality::Rejected(Rejection::Role)
    );
}

#[test]
fn unbound_cannot_move() {
    let session = Session::default();
    assert_eq!(allowed(&session, None, Move { dir: Direction::Left }.into(), 1), Legality::Rejected(Rejection::Role));
    assert_eq!(allowed(&session, None, Payload::AdminSubscribe(admin_game("A", "b")), 1), Legality::Allowed);
}

#[test]
fn seq_must_increase() {
    let mut session = Session::default();
    let first = WireMessage::new(5, Join { game_code: "A".into(), name: "n".into() });
    assert_eq!(session.check(None, &first), Legality::Allowed);
    session.admit(&first);
    assert_eq!(session.check(None, &first), Legality::Rejected(Rejection::Seq));
}

#[test]
fn admin_credentials_must_match() {
    let session = Session {
        role: SessionRole::Admin { game_code: "ABCDEF".into(), admin_token: "secret".into() },
        last_seq: None,
    };
    assert_eq!(
        allowed(&session, Some(PhaseHint::Lobby), Payload::AdminStart(admin_game("ABCDEF", "secret")), 1),
        Legality::Allowed
    );
    assert_eq!(
        allowed(&session, Some(PhaseHint::Lobby), Payload::AdminStart(admin_game("ABCDEF", "guess")), 1),
        Legality::Rejected(Rejection::Credentials)
    );
    assert_eq!(
        allowed(&session, Some(PhaseHint::Lobby), Payload::AdminEnd(admin_game("ABCDEF", "secret")), 1),
        Legality::Rejected(Rejection::Phase)
    );
}

#[test]
fn server_types_are_rejected_from_clients() {
    let session = Session::default();
    assert_eq!(allowed(&session, None, NothingHere {}.into(), 1), Legality::Rejected(Rejection::Direction));
}

#[test]
fn vocabulary_is_closed_and_complete() {
    let clients = VOCABULARY.iter().filter(|(_, f)| *f == Flow::ClientToServer).count();
    let servers = VOCABULARY.iter().filter(|(_, f)| *f == Flow::ServerToClient).count();
    assert_eq!((clients, servers), (12, 15));
}

#[test]
fn game_over_winner_is_required_even_when_null() {
    let m = decode_message(br#"{"type":"game_over","seq":4,"payload":{"winner":null,"reason":"admin_end"}}"#).unwrap();
    assert_eq!(m.payload, Payload::GameOver(GameOver { winner: None, reason: crate::engine::EndReason::AdminEnd }));
    assert!(decode_message(br#"{"type":"game_over","seq":4,"payload":{"reason":"admin_end"}}"#).is_err());
}
