//! Serves allowed-token masks over TCP and plays a client against it.
//!
//!     cargo run --example mask_service

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use entlink::kb::{parse_kb, prune_ambiguous_synonyms};
use entlink::service::{serve_tcp, MaskService, TrieRegistry, DEFAULT_IDLE_TIMEOUT};
use entlink::tokenizer::{CharTokenizer, Tokenizer, TokenizerSpec};
use entlink::trie::build_trie;
use serde_json::{json, Value};

const KB: &str = include_str!("../tests/fixtures/discharge_kb.ndjson");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kb = parse_kb(KB, "discharge_kb.ndjson".as_ref())?;
    let pruned = prune_ambiguous_synonyms(&kb);
    let tok = CharTokenizer::from_texts(pruned.all_kept());
    let mut registry = TrieRegistry::new();
    for group in kb.groups() {
        registry.insert(build_trie(&pruned, group, &tok)?.with_tokenizer(TokenizerSpec::from(&tok)));
    }
    let service = Arc::new(MaskService::new(registry, DEFAULT_IDLE_TIMEOUT)?);

    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let server = {
        let (service, stop) = (Arc::clone(&service), Arc::clone(&stop));
        std::thread::spawn(move || serve_tcp(service, listener, stop))
    };
    println!("listening on {addr}");

    let stream = TcpStream::connect(addr)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = stream;
    let mut ask = |req: Value| -> std::io::Result<Value> {
        writeln!(writer, "{req}")?;
        let mut line = String::new();
        reader.read_line(&mut line)?;
        println!("> {req}\n< {}", line.trim_end());
        Ok(serde_json::from_str(&line).expect("server speaks JSON"))
    };

    let fp = tok.fingerprint();
    let opened = ask(json!({"op": "open", "request_id": 1, "payload": {"group": "DISO", "fingerprint": fp}}))?;
    let session = opened["result"]["session"].clone();
    // walk "Fluid Discharge" one character at a time, checking each step is allowed
    let target = tok.encode("Fluid Discharge");
    for i in [0, 1, 6, target.len()] {
        ask(json!({"op": "allowed", "session": session, "request_id": i + 2, "payload": {"prefix": &target[..i]}}))?;
    }
    ask(json!({"op": "resolve", "session": session, "request_id": 90, "payload": {"tokens": target}}))?;
    ask(json!({"op": "resolve", "session": session, "request_id": 91, "payload": {"tokens": tok.encode("Discharge")}}))?;
    ask(json!({"op": "close", "session": session, "request_id": 92}))?;

    stop.store(true, Ordering::SeqCst);
    server.join().expect("server thread")?;
    Ok(())
}
