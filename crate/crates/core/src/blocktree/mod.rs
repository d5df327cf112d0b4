//! A tree of blocks whose appends are gated by a token oracle.
//!
//! Appending is split the same way as the refined append: a token is granted
//! for a candidate on the currently selected head (after validation), then
//! consumed and the candidate concatenated in one indivisible step. Under
//! `Frugal(k)` at most `k` tokens may be consumed per parent block, so no
//! block ever has more than `k` children.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::digest::sha256;

/// Bounded retry of the refined append loop.
pub const APPEND_RETRIES: usize = 16;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub [u8; 32]);

impl BlockId {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// First 8 hex digits, for human-readable output.
    pub fn short(&self) -> String {
        self.to_hex()[..8].to_owned()
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BlockId({})", self.short())
    }
}

impl FromStr for BlockId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = hex::decode(s).map_err(|e| format!("bad block id {s:?}: {e}"))?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| format!("block id {s:?} is not 32 bytes"))?;
        Ok(BlockId(arr))
    }
}

impl Serialize for BlockId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for BlockId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Block contents with a canonical byte encoding, hashed into the block id.
pub trait Payload: Clone {
    fn canonical_bytes(&self) -> Vec<u8>;
}

impl Payload for String {
    fn canonical_bytes(&self) -> Vec<u8> {
        self.as_bytes().to_vec()
    }
}

/// Id of a block with `payload` appended under `parent`.
pub fn block_id<P: Payload>(parent: &BlockId, payload: &P) -> BlockId {
    let mut bytes = parent.0.to_vec();
    bytes.extend(payload.canonical_bytes());
    BlockId(sha256(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleConfig {
    /// Unbounded tokens per block.
    Prodigal,
    /// At most `k` consumed tokens per block.
    Frugal(usize),
}

/// `Frugal(1)`: the ideal blockchain, never forks.
impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig::Frugal(1)
    }
}

impl OracleConfig {
    /// Per-block bound on consumed tokens, `None` when unbounded.
    pub fn bound(self) -> Option<usize> {
        match self {
            OracleConfig::Prodigal => None,
            OracleConfig::Frugal(k) => Some(k),
        }
    }
}

impl fmt::Display for OracleConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.bound() {
            None => f.write_str("prodigal"),
            Some(k) => write!(f, "frugal:{k}"),
        }
    }
}

impl FromStr for OracleConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "prodigal" {
            return Ok(OracleConfig::Prodigal);
        }
        let k = s
            .strip_prefix("frugal:")
            .and_then(|k| k.parse::<usize>().ok())
            .ok_or_else(|| format!("expected `prodigal` or `frugal:K`, got {s:?}"))?;
        if k == 0 {
            return Err("frugal bound must be at least 1".into());
        }
        Ok(OracleConfig::Frugal(k))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block<P> {
    pub id: BlockId,
    pub parent: Option<BlockId>,
    /// `None` for the genesis block.
    pub payload: Option<P>,
    pub height: u64,
}

/// Permission to append one particular block under one particular parent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub id: u64,
    pub target: BlockId,
    pub carried: BlockId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelectionOutcome {
    /// Genesis first, head last.
    pub chain: Vec<BlockId>,
}

impl SelectionOutcome {
    pub fn head(&self) -> BlockId {
        *self.chain.last().expect("a chain always contains genesis")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("head {0} is no longer selected")]
    StaleHead(BlockId),
    #[error("token {0} was already consumed")]
    AlreadyConsumed(u64),
    #[error("block {0} already has its maximum number of successors")]
    FrugalLimitReached(BlockId),
    #[error("unknown token {0}")]
    UnknownToken(u64),
    #[error("unknown block {0}")]
    UnknownBlock(BlockId),
    #[error("block {0} is already in the tree")]
    DuplicateBlock(BlockId),
    #[error("token {token} does not carry block {block}")]
    TokenMismatch { token: u64, block: BlockId },
    #[error("no token obtained after {0} attempts")]
    RetryExhausted(usize),
}

/// Outcome of asking the oracle for a token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Grant<R> {
    Token(Token),
    /// The validator refused the candidate with the given reason.
    Refused(R),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AppendError<R> {
    #[error("validation refused the block")]
    Refused(R),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TokenState {
    token: Token,
    consumed: bool,
}

#[derive(Debug, Clone)]
pub struct BlockTree<P> {
    blocks: BTreeMap<BlockId, Block<P>>,
    children: BTreeMap<BlockId, Vec<BlockId>>,
    genesis: BlockId,
    oracle: OracleConfig,
    tokens: Vec<TokenState>,
    consumed_per_target: BTreeMap<BlockId, usize>,
    token_of_block: BTreeMap<BlockId, u64>,
}

impl<P: Payload> BlockTree<P> {
    /// A tree holding only a genesis block derived from `genesis_tag`.
    pub fn new(oracle: OracleConfig, genesis_tag: &[u8]) -> Self {
        let mut seed = b"genesis:".to_vec();
        seed.extend_from_slice(genesis_tag);
        let genesis = BlockId(sha256(seed));
        let mut blocks = BTreeMap::new();
        blocks.insert(
            genesis,
            Block {
                id: genesis,
                parent: None,
                payload: None,
                height: 0,
            },
        );
        BlockTree {
            blocks,
            children: BTreeMap::new(),
            genesis,
            oracle,
            tokens: Vec::new(),
            consumed_per_target: BTreeMap::new(),
            token_of_block: BTreeMap::new(),
        }
    }

    pub fn oracle(&self) -> OracleConfig {
        self.oracle
    }

    pub fn genesis(&self) -> BlockId {
        self.genesis
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn block(&self, id: &BlockId) -> Option<&Block<P>> {
        self.blocks.get(id)
    }

    pub fn blocks(&self) -> impl Iterator<Item = &Block<P>> {
        self.blocks.values()
    }

    pub fn children(&self, id: &BlockId) -> &[BlockId] {
        self.children.get(id).map_or(&[], Vec::as_slice)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Block<P>> {
        self.blocks
            .values()
            .filter(|b| self.children(&b.id).is_empty())
    }

    /// Longest chain; among equally long chains, the lexicographically
    /// smallest head id.
    pub fn select(&self) -> SelectionOutcome {
        SelectionOutcome {
            chain: self.chain_to(&self.head()).expect("head is in the tree"),
        }
    }

    pub fn read(&self) -> SelectionOutcome {
        self.select()
    }

    /// Head of the selected chain: greatest height, then smallest id.
    pub fn head(&self) -> BlockId {
        self.blocks
            .values()
            .max_by(|a, b| a.height.cmp(&b.height).then(b.id.cmp(&a.id)))
            .expect("genesis is always present")
            .id
    }

    /// Block ids from genesis to `id`.
    pub fn chain_to(&self, id: &BlockId) -> Result<Vec<BlockId>, TreeError> {
        let mut chain = Vec::new();
        let mut cur = Some(*id);
        while let Some(c) = cur {
            let block = self.blocks.get(&c).ok_or(TreeError::UnknownBlock(c))?;
            chain.push(c);
            cur = block.parent;
        }
        chain.reverse();
        Ok(chain)
    }

    /// Validates `candidate` against `head` and, if accepted, grants a fresh
    /// token for appending it there. `head` must be the selected head.
    pub fn get_token<R>(
        &mut self,
        head: BlockId,
        candidate: &P,
        validate: impl FnOnce(&P, BlockId, &Self) -> Result<(), R>,
    ) -> Result<Grant<R>, TreeError> {
        if self.head() != head {
            return Err(TreeError::StaleHead(head));
        }
        if let Err(reason) = validate(candidate, head, self) {
            return Ok(Grant::Refused(reason));
        }
        let token = Token {
            id: self.tokens.len() as u64,
            target: head,
            carried: block_id(&head, candidate),
        };
        self.tokens.push(TokenState {
            token: token.clone(),
            consumed: false,
        });
        Ok(Grant::Token(token))
    }

    fn check_consumable(&self, t: &Token) -> Result<(), TreeError> {
        let state = self
            .tokens
            .get(t.id as usize)
            .filter(|s| s.token == *t)
            .ok_or(TreeError::UnknownToken(t.id))?;
        if state.consumed {
            return Err(TreeError::AlreadyConsumed(t.id));
        }
        if let Some(k) = self.oracle.bound() {
            if self.consumed_count(&t.target) >= k {
                return Err(TreeError::FrugalLimitReached(t.target));
            }
        }
        Ok(())
    }

    /// Marks `t` consumed without appending anything.
    pub fn consume_token(&mut self, t: &Token) -> Result<(), TreeError> {
        self.check_consumable(t)?;
        self.tokens[t.id as usize].consumed = true;
        *self.consumed_per_target.entry(t.target).or_default() += 1;
        Ok(())
    }

    /// Consumes `t` and concatenates `payload` under the token's target as
    /// one step: either both happen or neither does.
    pub fn commit(&mut self, t: &Token, payload: P) -> Result<BlockId, TreeError> {
        self.check_consumable(t)?;
        let id = block_id(&t.target, &payload);
        if id != t.carried {
            return Err(TreeError::TokenMismatch {
                token: t.id,
                block: id,
            });
        }
        if self.blocks.contains_key(&id) {
            return Err(TreeError::DuplicateBlock(id));
        }
        let height = self.blocks[&t.target].height + 1;
        self.consume_token(t)?;
        self.blocks.insert(
            id,
            Block {
                id,
                parent: Some(t.target),
                payload: Some(payload),
                height,
            },
        );
        self.children.entry(t.target).or_default().push(id);
        self.token_of_block.insert(id, t.id);
        Ok(id)
    }

    /// The refined append: select the head, obtain a token for it, commit;
    /// retry while the oracle has no room left on the current head.
    pub fn append<R>(
        &mut self,
        payload: P,
        mut validate: impl FnMut(&P, BlockId, &Self) -> Result<(), R>,
    ) -> Result<BlockId, AppendError<R>> {
        for _ in 0..APPEND_RETRIES {
            let head = self.head();
            let token = match self.get_token(head, &payload, &mut validate) {
                Ok(Grant::Token(t)) => t,
                Ok(Grant::Refused(r)) => return Err(AppendError::Refused(r)),
                Err(TreeError::StaleHead(_)) => continue,
                Err(e) => return Err(e.into()),
            };
            match self.commit(&token, payload.clone()) {
                Ok(id) => return Ok(id),
                Err(TreeError::FrugalLimitReached(_)) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        Err(TreeError::RetryExhausted(APPEND_RETRIES).into())
    }

    pub fn consumed_count(&self, target: &BlockId) -> usize {
        self.consumed_per_target.get(target).copied().unwrap_or(0)
    }

    pub fn tokens_issued(&self) -> usize {
        self.tokens.len()
    }

    /// Token consumed to append `block`.
    pub fn token_of(&self, block: &BlockId) -> Option<u64> {
        self.token_of_block.get(block).copied()
    }

    pub fn max_children(&self) -> usize {
        self.children.values().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_single_chain(&self) -> bool {
        self.max_children() <= 1
    }

    /// Structural self-check: parent links, heights, the oracle bound and
    /// one distinct consumed token per appended block.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen_tokens = std::collections::BTreeSet::new();
        for b in self.blocks.values() {
            match b.parent {
                None if b.id == self.genesis && b.height == 0 => {}
                None => return Err(format!("block {} has no parent", b.id)),
                Some(p) => {
                    let parent = self.blocks.get(&p).ok_or(format!("dangling parent of {}", b.id))?;
                    if b.height != parent.height + 1 {
                        return Err(format!("height of {} is inconsistent", b.id));
                    }
                    let payload = b.payload.as_ref().ok_or("payload missing")?;
                    if block_id(&p, payload) != b.id {
                        return Err(format!("id of {} does not match its content", b.id));
                    }
                    let tok = self.token_of(&b.id).ok_or(format!("{} appended without a token", b.id))?;
                    if !seen_tokens.insert(tok) || !self.tokens[tok as usize].consumed {
                        return Err(format!("token {tok} is not uniquely consumed"));
                    }
                }
            }
        }
        if let Some(k) = self.oracle.bound() {
            for (parent, kids) in &self.children {
                if kids.len() > k {
                    return Err(format!("{parent} has {} children under frugal:{k}", kids.len()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockView<P> {
    pub id: BlockId,
    pub parent: Option<BlockId>,
    pub height: u64,
    pub payload: Option<P>,
}

/// Blocks in id order with parent links.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSnapshot<P> {
    pub oracle: String,
    pub genesis: BlockId,
    pub head: BlockId,
    pub blocks: Vec<BlockView<P>>,
}

impl<P: Payload> BlockTree<P> {
    pub fn snapshot<Q>(&self, view: impl Fn(&P) -> Q) -> TreeSnapshot<Q> {
        TreeSnapshot {
            oracle: self.oracle.to_string(),
            genesis: self.genesis,
            head: self.head(),
            blocks: self
                .blocks
                .values()
                .map(|b| BlockView {
                    id: b.id,
                    parent: b.parent,
                    height: b.height,
                    payload: b.payload.as_ref().map(&view),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(oracle: OracleConfig) -> BlockTree<String> {
        BlockTree::new(oracle, b"test")
    }

    fn accept(_: &String, _: BlockId, _: &BlockTree<String>) -> Result<(), ()> {
        Ok(())
    }

    fn grant(t: &mut BlockTree<String>, p: &str) -> Token {
        let head = t.head();
        match t.get_token(head, &p.to_string(), accept).unwrap() {
            Grant::Token(tok) => tok,
            Grant::Refused(()) => unreachable!(),
        }
    }

    #[test]
    fn single_chain_selection() {
        let mut t = tree(OracleConfig::Frugal(1));
        let a = t.append("a".to_string(), accept).unwrap();
        let b = t.append("b".to_string(), accept).unwrap();
        assert_eq!(t.select().chain, vec![t.genesis(), a, b]);
        assert_eq!(t.read(), t.select());
    }

    #[test]
    fn equal_height_fork_picks_smaller_head_id() {
        let mut t = tree(OracleConfig::Prodigal);
        let ta = grant(&mut t, "a");
        let tb = grant(&mut t, "b");
        let a = t.commit(&ta, "a".into()).unwrap();
        let b = t.commit(&tb, "b".into()).unwrap();
        // hand oracle: compare the two hex ids directly
        let expected = if a.to_hex() < b.to_hex() { a } else { b };
        assert_eq!(t.head(), expected);
        assert_eq!(t.children(&t.genesis()).len(), 2);
    }

    #[test]
    fn longer_branch_wins_regardless_of_ids() {
        let mut t = tree(OracleConfig::Prodigal);
        let ta = grant(&mut t, "a");
        let tb = grant(&mut t, "b");
        let a = t.commit(&ta, "a".into()).unwrap();
        let b = t.commit(&tb, "b".into()).unwrap();
        let loser = if t.head() == a { b } else { a };
        let tc = Token {
            id: t.tokens.len() as u64,
            target: loser,
            carried: block_id(&loser, &"c".to_string()),
        };
        t.tokens.push(TokenState {
            token: tc.clone(),
            consumed: false,
        });
        let c = t.commit(&tc, "c".into()).unwrap();
        assert_eq!(t.select().chain, vec![t.genesis(), loser, c]);
    }

    #[test]
    fn token_consumption_rules() {
        let mut t = tree(OracleConfig::Frugal(1));
        let first = grant(&mut t, "a");
        let second = grant(&mut t, "b");
        t.consume_token(&first).unwrap();
        assert_eq!(t.consume_token(&first), Err(TreeError::AlreadyConsumed(first.id)));
        assert_eq!(
            t.consume_token(&second),
            Err(TreeError::FrugalLimitReached(t.genesis()))
        );
    }

    #[test]
    fn stale_head_and_refusal() {
        let mut t = tree(OracleConfig::Frugal(1));
        let g = t.genesis();
        t.append("a".to_string(), accept).unwrap();
        assert_eq!(
            t.get_token(g, &"b".to_string(), accept),
            Err(TreeError::StaleHead(g))
        );
        let head = t.head();
        assert_eq!(
            t.get_token(head, &"b".to_string(), |_, _, _| Err("guard false")),
            Ok(Grant::Refused("guard false"))
        );
        assert_eq!(
            t.append("b".to_string(), |_, _, _| Err(7)),
            Err(AppendError::Refused(7))
        );
    }

    #[test]
    fn frugal_race_loser_retries_on_new_head() {
        let mut t = tree(OracleConfig::Frugal(1));
        let g = t.genesis();
        let ta = grant(&mut t, "a");
        let tb = grant(&mut t, "b");
        let a = t.commit(&ta, "a".into()).unwrap();
        assert_eq!(t.commit(&tb, "b".into()), Err(TreeError::FrugalLimitReached(g)));
        let b = t.append("b".to_string(), accept).unwrap();
        assert_eq!(t.select().chain, vec![g, a, b]);
        t.check_invariants().unwrap();
    }

    #[test]
    fn prodigal_race_forks() {
        let mut t = tree(OracleConfig::Prodigal);
        let ta = grant(&mut t, "a");
        let tb = grant(&mut t, "b");
        t.commit(&ta, "a".into()).unwrap();
        t.commit(&tb, "b".into()).unwrap();
        assert_eq!(t.children(&t.genesis()).len(), 2);
        assert!(!t.is_single_chain());
        t.check_invariants().unwrap();
    }

    #[test]
    fn oracle_config_text() {
        assert_eq!("frugal:3".parse(), Ok(OracleConfig::Frugal(3)));
        assert_eq!("prodigal".parse(), Ok(OracleConfig::Prodigal));
        assert!("frugal:0".parse::<OracleConfig>().is_err());
        assert_eq!(OracleConfig::default().to_string(), "frugal:1");
    }
}
