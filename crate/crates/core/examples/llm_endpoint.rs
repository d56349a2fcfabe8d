//! Sends one prompt to an OpenAI-compatible chat endpoint configured through
//! `CUP_LLM_BASE_URL`, `CUP_LLM_MODEL` and optionally `CUP_LLM_TOKEN`.
//!
//!     CUP_LLM_BASE_URL=http://localhost:8000/v1 CUP_LLM_MODEL=qwen \
//!         cargo run --example llm_endpoint -- "Say hello"

use cup::llmclient::{ChatExchange, ChatModel, LlmClient};

fn main() {
    let prompt = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "Reply with the word ready.".into());
    let client = match LlmClient::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("endpoint not configured: {e}");
            std::process::exit(2);
        }
    };
    match client.complete(&ChatExchange::user(client.model_name(), prompt)) {
        Ok(reply) => println!("{reply}"),
        Err(e) => {
            eprintln!("request failed: {e}");
            std::process::exit(1);
        }
    }
}
