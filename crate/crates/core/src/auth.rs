//! Accounts, admin-issued verification codes, and bearer sessions.

use std::sync::{Arc, OnceLock};

use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::{Algorithm, Argon2, Params, Version};
use chrono::{DateTime, Duration, Utc};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::storage::{Reader, StorageError, Store, Table, Txn};

pub const MIN_PASSWORD_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Annotator,
    Expert,
    Admin,
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "annotator" => Ok(Role::Annotator),
            "expert" => Ok(Role::Expert),
            "admin" => Ok(Role::Admin),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAccount {
    pub user_id: String,
    pub username: String,
    /// PHC-format argon2id digest; never the password itself.
    pub password_digest: String,
    pub role: Role,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationCode {
    pub code: String,
    pub issued_by: String,
    pub granted_role: Role,
    pub consumed_by: Option<String>,
    pub issued_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub token: String,
    pub user_id: String,
    pub expires_at: DateTime<Utc>,
}

/// Stored form of a session, keyed by a digest of the token.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SessionRecord {
    user_id: String,
    expires_at: DateTime<Utc>,
}

/// The authenticated caller of an operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identity {
    pub user_id: String,
    pub username: String,
    pub role: Role,
}

#[derive(Debug, Error)]
pub enum AuthError {
    #[error("only administrators may do this")]
    NotAdmin,
    #[error("codes can only grant the annotator or expert role")]
    InvalidRole,
    #[error("verification code is not valid")]
    InvalidCode,
    #[error("verification code has already been used")]
    CodeAlreadyUsed,
    #[error("username is already taken")]
    UsernameTaken,
    #[error("usernames are 1-64 characters of letters, digits, `.`, `_` or `-`")]
    InvalidUsername,
    #[error("password must be at least {MIN_PASSWORD_LEN} characters")]
    WeakPassword,
    #[error("invalid username or password")]
    InvalidCredentials,
    #[error("session is invalid or has expired")]
    InvalidOrExpiredSession,
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("password hashing failed: {0}")]
    Hashing(String),
    #[error(transparent)]
    Storage(#[from] StorageError),
}

/// Argon2id work factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashCost {
    pub memory_kib: u32,
    pub iterations: u32,
}

impl Default for HashCost {
    /// Roughly 80 ms per verification on a single commodity core.
    fn default() -> Self {
        HashCost {
            memory_kib: 32 * 1024,
            iterations: 3,
        }
    }
}

impl HashCost {
    /// Cheapest allowed setting, for tests that create many accounts.
    pub fn minimal() -> Self {
        HashCost {
            memory_kib: 64,
            iterations: 1,
        }
    }

    fn hasher(&self) -> Argon2<'static> {
        let params = Params::new(self.memory_kib, self.iterations, 1, None)
            .expect("argon2 parameters within bounds");
        Argon2::new(Algorithm::Argon2id, Version::V0x13, params)
    }
}

#[derive(Debug, Clone)]
pub struct AuthConfig {
    pub session_lifetime: Duration,
    pub hash_cost: HashCost,
}

impl Default for AuthConfig {
    fn default() -> Self {
        AuthConfig {
            session_lifetime: Duration::hours(24),
            hash_cost: HashCost::default(),
        }
    }
}

fn random_hex(n_bytes: usize) -> String {
    let mut buf = vec![0u8; n_bytes];
    rand::rng().fill_bytes(&mut buf);
    hex::encode(buf)
}

fn token_key(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

fn valid_username(name: &str) -> bool {
    (1..=64).contains(&name.len())
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

pub(crate) fn load_account(r: &impl Reader, user_id: &str) -> Result<Option<UserAccount>, StorageError> {
    r.get(Table::Accounts, user_id)
}

pub(crate) fn account_by_name(r: &impl Reader, username: &str) -> Result<Option<UserAccount>, StorageError> {
    match r.get::<String>(Table::Usernames, username)? {
        Some(id) => load_account(r, &id),
        None => Ok(None),
    }
}

#[derive(Clone)]
pub struct Auth {
    store: Arc<Store>,
    config: AuthConfig,
}

impl Auth {
    pub fn new(store: Arc<Store>, config: AuthConfig) -> Self {
        Auth { store, config }
    }

    pub fn config(&self) -> &AuthConfig {
        &self.config
    }

    fn digest(&self, password: &str) -> Result<String, AuthError> {
        let mut salt = [0u8; 16];
        rand::rng().fill_bytes(&mut salt);
        let salt = SaltString::encode_b64(&salt).map_err(|e| AuthError::Hashing(e.to_string()))?;
        self.config
            .hash_cost
            .hasher()
            .hash_password(password.as_bytes(), &salt)
            .map(|h| h.to_string())
            .map_err(|e| AuthError::Hashing(e.to_string()))
    }

    fn verify(&self, password: &str, digest: &str) -> bool {
        let Ok(parsed) = PasswordHash::new(digest) else {
            return false;
        };
        // parameters come from the digest itself
        Argon2::default()
            .verify_password(password.as_bytes(), &parsed)
            .is_ok()
    }

    /// A digest to verify against when the username does not exist, so both
    /// failure causes cost the same.
    fn decoy_digest(&self) -> &'static str {
        static DECOY: OnceLock<String> = OnceLock::new();
        DECOY.get_or_init(|| self.digest("decoy-password").unwrap_or_default())
    }

    fn insert_account(
        &self,
        txn: &mut Txn,
        username: &str,
        digest: String,
        role: Role,
    ) -> Result<UserAccount, AuthError> {
        if txn.get_raw(Table::Usernames, username)?.is_some() {
            return Err(AuthError::UsernameTaken);
        }
        let account = UserAccount {
            user_id: format!("usr_{}", random_hex(8)),
            username: username.to_string(),
            password_digest: digest,
            role,
            created_at: Utc::now(),
        };
        txn.put(Table::Accounts, &account.user_id, &account)?;
        txn.put(Table::Usernames, username, &account.user_id)?;
        Ok(account)
    }

    /// The checks `register` and `create_admin` apply to new credentials.
    pub fn check_new_credentials(username: &str, password: &str) -> Result<(), AuthError> {
        if !valid_username(username) {
            return Err(AuthError::InvalidUsername);
        }
        if password.chars().count() < MIN_PASSWORD_LEN {
            return Err(AuthError::WeakPassword);
        }
        Ok(())
    }

    /// Creates an administrator directly. Used once when a data directory is
    /// initialized.
    pub fn create_admin(&self, username: &str, password: &str) -> Result<UserAccount, AuthError> {
        Self::check_new_credentials(username, password)?;
        let digest = self.digest(password)?;
        self.store
            .transact(|txn| self.insert_account(txn, username, digest, Role::Admin))
    }

    pub fn issue_code(&self, caller: &Identity, granted_role: Role) -> Result<VerificationCode, AuthError> {
        if caller.role != Role::Admin {
            return Err(AuthError::NotAdmin);
        }
        if granted_role == Role::Admin {
            return Err(AuthError::InvalidRole);
        }
        let code = VerificationCode {
            code: random_hex(16),
            issued_by: caller.user_id.clone(),
            granted_role,
            consumed_by: None,
            issued_at: Utc::now(),
        };
        self.store.transact(|txn| {
            txn.put(Table::Codes, &code.code, &code)?;
            Ok::<_, AuthError>(())
        })?;
        Ok(code)
    }

    /// Creates an account from a verification code. The code is consumed in
    /// the same transaction that creates the account.
    pub fn register(&self, code: &str, username: &str, password: &str) -> Result<UserAccount, AuthError> {
        Self::check_new_credentials(username, password)?;
        // reject unusable codes before paying for a digest
        let existing: Option<VerificationCode> = self.store.read(|s| s.get(Table::Codes, code))?;
        match existing {
            None => return Err(AuthError::InvalidCode),
            Some(c) if c.consumed_by.is_some() => return Err(AuthError::CodeAlreadyUsed),
            Some(_) => {}
        }
        let digest = self.digest(password)?;
        self.store.transact(|txn| {
            let mut vc: VerificationCode = txn.get(Table::Codes, code)?.ok_or(AuthError::InvalidCode)?;
            if vc.consumed_by.is_some() {
                return Err(AuthError::CodeAlreadyUsed);
            }
            let account = self.insert_account(txn, username, digest, vc.granted_role)?;
            vc.consumed_by = Some(account.user_id.clone());
            txn.put(Table::Codes, code, &vc)?;
            Ok(account)
        })
    }

    pub fn login(&self, username: &str, password: &str) -> Result<Session, AuthError> {
        let account = self.store.read(|s| account_by_name(s, username))?;
        let Some(account) = account else {
            self.verify(password, self.decoy_digest());
            return Err(AuthError::InvalidCredentials);
        };
        if !self.verify(password, &account.password_digest) {
            return Err(AuthError::InvalidCredentials);
        }
        let session = Session {
            token: random_hex(32),
            user_id: account.user_id,
            expires_at: Utc::now() + self.config.session_lifetime,
        };
        let record = SessionRecord {
            user_id: session.user_id.clone(),
            expires_at: session.expires_at,
        };
        self.store.transact(|txn| {
            txn.put(Table::Sessions, &token_key(&session.token), &record)?;
            Ok::<_, AuthError>(())
        })?;
        Ok(session)
    }

    pub fn authenticate(&self, token: &str) -> Result<Identity, AuthError> {
        self.store.read(|s| {
            let record: SessionRecord = s
                .get(Table::Sessions, &token_key(token))?
                .ok_or(AuthError::InvalidOrExpiredSession)?;
            if Utc::now() >= record.expires_at {
                return Err(AuthError::InvalidOrExpiredSession);
            }
            let account = load_account(s, &record.user_id)?.ok_or(AuthError::InvalidOrExpiredSession)?;
            Ok(Identity {
                user_id: account.user_id,
                username: account.username,
                role: account.role,
            })
        })
    }

    pub fn logout(&self, token: &str) -> Result<(), AuthError> {
        self.store.transact(|txn| {
            if txn.delete(Table::Sessions, &token_key(token))? {
                Ok(())
            } else {
                Err(AuthError::InvalidOrExpiredSession)
            }
        })
    }

    pub fn identity_of(&self, username: &str) -> Result<Identity, AuthError> {
        let account = self
            .store
            .read(|s| account_by_name(s, username))?
            .ok_or_else(|| AuthError::UnknownUser(username.to_string()))?;
        Ok(Identity {
            user_id: account.user_id,
            username: account.username,
            role: account.role,
        })
    }

    /// Administrator accounts, by username.
    pub fn admins(&self) -> Result<Vec<Identity>, AuthError> {
        let accounts = self.store.read(|s| s.scan::<UserAccount>(Table::Accounts, ""))?;
        let mut out: Vec<Identity> = accounts
            .into_iter()
            .map(|(_, a)| a)
            .filter(|a| a.role == Role::Admin)
            .map(|a| Identity {
                user_id: a.user_id,
                username: a.username,
                role: a.role,
            })
            .collect();
        out.sort_by(|a, b| a.username.cmp(&b.username));
        Ok(out)
    }
}
