use std::collections::{BTreeMap, BTreeSet};

use super::model::{LocalGroup, Relation, SupportKind, SupportNode};
use super::SceneError;

/// Support-relation forest: every object maps to exactly one parent, and
/// every chain ends in one of the canonical roots.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SceneTree {
    parent: BTreeMap<String, SupportNode>,
    children: BTreeMap<String, Vec<String>>,
}

impl SceneTree {
    /// Validates raw `(child, parent)` entries against the set of object ids.
    ///
    /// Rejects, in this order: unknown children, duplicate entries for one
    /// child, objects without a parent, dangling parent ids, cycles, and
    /// hanging/attached relations outside wall or ceiling subtrees.
    pub fn from_entries(
        entries: Vec<(String, SupportNode)>,
        object_ids: &BTreeSet<String>,
    ) -> Result<SceneTree, SceneError> {
        let mut parent: BTreeMap<String, SupportNode> = BTreeMap::new();
        for (child, node) in entries {
            if !object_ids.contains(&child) {
                return Err(SceneError::UnknownObject { id: child });
            }
            if parent.contains_key(&child) {
                return Err(SceneError::MultipleParents { id: child });
            }
            parent.insert(child, node);
        }
        if let Some(id) = object_ids.iter().find(|id| !parent.contains_key(*id)) {
            return Err(SceneError::MissingParent { id: id.clone() });
        }
        for (child, node) in &parent {
            if let SupportKind::Object(p) = &node.kind {
                if !object_ids.contains(p) {
                    return Err(SceneError::DanglingParent {
                        id: child.clone(),
                        parent: p.clone(),
                    });
                }
            }
        }
        for start in parent.keys() {
            let mut seen = BTreeSet::new();
            let mut cur = start.as_str();
            while let SupportKind::Object(p) = &parent[cur].kind {
                if !seen.insert(cur) || p == start {
                    return Err(SceneError::Cycle { id: start.clone() });
                }
                cur = p;
            }
        }
        let mut children: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (child, node) in &parent {
            if let SupportKind::Object(p) = &node.kind {
                children.entry(p.clone()).or_default().push(child.clone());
            }
        }
        let tree = SceneTree { parent, children };
        for (child, node) in &tree.parent {
            if matches!(node.relation, Relation::Hanging | Relation::Attached)
                && !matches!(
                    tree.root_kind(child),
                    SupportKind::Wall | SupportKind::Ceiling
                )
            {
                return Err(SceneError::InvalidRelation {
                    id: child.clone(),
                    relation: node.relation,
                    parent: node.kind.to_string(),
                });
            }
        }
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.parent.keys().map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &SupportNode)> {
        self.parent.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn parent(&self, id: &str) -> &SupportNode {
        &self.parent[id]
    }

    /// Direct children of an object, sorted by id.
    pub fn children(&self, id: &str) -> &[String] {
        self.children.get(id).map_or(&[], Vec::as_slice)
    }

    /// Canonical node at the top of `id`'s support chain.
    pub fn root_kind(&self, id: &str) -> SupportKind {
        let mut cur = id;
        loop {
            match &self.parent[cur].kind {
                SupportKind::Object(p) => cur = p,
                k => return k.clone(),
            }
        }
    }

    /// Object ids whose parent is canonical, sorted.
    pub fn top_level(&self) -> Vec<&str> {
        self.parent
            .iter()
            .filter(|(_, n)| n.kind.is_canonical())
            .map(|(k, _)| k.as_str())
            .collect()
    }

    pub fn is_wall_rooted(&self, id: &str) -> bool {
        matches!(self.root_kind(id), SupportKind::Wall | SupportKind::Ceiling)
    }

    /// Direct wall/ceiling children, and anything hanging or attached.
    pub fn is_wall_mounted(&self, id: &str) -> bool {
        let node = &self.parent[id];
        matches!(node.kind, SupportKind::Wall | SupportKind::Ceiling)
            || matches!(node.relation, Relation::Hanging | Relation::Attached)
    }

    /// All objects, parents before children; siblings and roots by id.
    pub fn preorder(&self) -> Vec<&str> {
        let mut out = Vec::with_capacity(self.parent.len());
        for root in self.top_level() {
            self.push_preorder(root, &mut out);
        }
        out
    }

    fn push_preorder<'a>(&'a self, id: &'a str, out: &mut Vec<&'a str>) {
        out.push(id);
        for c in self.children(id) {
            self.push_preorder(c, out);
        }
    }

    /// Every descendant of `id` in pre-order (excluding `id`).
    pub fn descendants(&self, id: &str) -> Vec<&str> {
        let mut out = Vec::new();
        for c in self.children(id) {
            self.push_preorder(c, &mut out);
        }
        out
    }

    /// Number of object ancestors (0 for top-level objects).
    pub fn depth(&self, id: &str) -> usize {
        let mut d = 0;
        let mut cur = id;
        while let SupportKind::Object(p) = &self.parent[cur].kind {
            d += 1;
            cur = p;
        }
        d
    }

    /// Local groups in post-order: every object with at least one child,
    /// emitted after all groups in its subtree.
    pub fn local_groups(&self) -> Vec<LocalGroup> {
        let mut out = Vec::new();
        for root in self.top_level() {
            self.push_groups(root, &mut out);
        }
        out
    }

    fn push_groups(&self, id: &str, out: &mut Vec<LocalGroup>) {
        let kids = self.children(id);
        for c in kids {
            self.push_groups(c, out);
        }
        if !kids.is_empty() {
            out.push(LocalGroup {
                root_id: id.to_string(),
                child_ids: kids.to_vec(),
            });
        }
    }

    /// Roots of the global stage, sorted: ground and ground-wall objects plus
    /// every local-group root, excluding wall and ceiling subtrees.
    pub fn global_roots(&self) -> Vec<String> {
        let mut set: BTreeSet<String> = BTreeSet::new();
        for (id, node) in &self.parent {
            if matches!(node.kind, SupportKind::Ground | SupportKind::GroundWall) {
                set.insert(id.clone());
            }
        }
        for g in self.local_groups() {
            set.insert(g.root_id);
        }
        set.into_iter()
            .filter(|id| !self.is_wall_rooted(id))
            .collect()
    }
}
