//! Blocking client for a running service.

use std::time::Duration;

use reqwest::blocking::{Client as Http, RequestBuilder};
use reqwest::Method;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::error::ErrorBody;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("{status}: {} ({})", .body.message, .body.code)]
    Api { status: u16, body: ErrorBody },
    #[error("cannot reach {url}: {message}")]
    Transport { url: String, message: String },
    #[error("unexpected response: {0}")]
    Decode(String),
}

impl ClientError {
    /// True for 4xx answers other than 404/409, i.e. rejected input.
    pub fn is_validation(&self) -> bool {
        matches!(self, ClientError::Api { status, .. } if *status == 422 || *status == 400)
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: Http,
}

impl Client {
    pub fn new(base: &str) -> Result<Self, ClientError> {
        let http = Http::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| ClientError::Transport {
                url: base.to_string(),
                message: e.to_string(),
            })?;
        Ok(Client {
            base: base.trim_end_matches('/').to_string(),
            http,
        })
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn request(&self, method: Method, path: &str) -> RequestBuilder {
        self.http.request(method, format!("{}{path}", self.base))
    }

    fn send(&self, req: RequestBuilder) -> Result<reqwest::blocking::Response, ClientError> {
        let resp = req.send().map_err(|e| ClientError::Transport {
            url: self.base.clone(),
            message: e.to_string(),
        })?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let text = resp.text().unwrap_or_default();
        let body = serde_json::from_str(&text).unwrap_or(ErrorBody {
            code: "http_error".into(),
            message: text,
            detail: serde_json::Value::Null,
        });
        Err(ClientError::Api {
            status: status.as_u16(),
            body,
        })
    }

    fn json<T: DeserializeOwned>(&self, req: RequestBuilder) -> Result<T, ClientError> {
        self.send(req)?.json().map_err(|e| ClientError::Decode(e.to_string()))
    }

    pub fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        self.json(self.request(Method::GET, path))
    }

    pub fn get_query<T: DeserializeOwned>(&self, path: &str, query: &[(&str, String)]) -> Result<T, ClientError> {
        self.json(self.request(Method::GET, path).query(query))
    }

    pub fn get_text(&self, path: &str, query: &[(&str, String)]) -> Result<String, ClientError> {
        self.send(self.request(Method::GET, path).query(query))?
            .text()
            .map_err(|e| ClientError::Decode(e.to_string()))
    }

    pub fn send_json<B: Serialize, T: DeserializeOwned>(
        &self,
        method: Method,
        path: &str,
        body: &B,
    ) -> Result<T, ClientError> {
        self.json(self.request(method, path).json(body))
    }

    pub fn put_text<T: DeserializeOwned>(&self, path: &str, body: String) -> Result<T, ClientError> {
        self.json(
            self.request(Method::PUT, path)
                .header(reqwest::header::CONTENT_TYPE, "text/turtle")
                .body(body),
        )
    }

    pub fn delete<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        self.json(self.request(Method::DELETE, path))
    }
}
