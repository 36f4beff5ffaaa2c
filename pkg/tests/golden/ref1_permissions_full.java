import poporo.models.JML.*;
import org.jmlspecs.models.JMLEqualsEqualsPair;

public abstract class ref1_permissions {
/*@ public model BSet<Integer> CONTENTS; */
/*@ public model BSet<Integer> PERSON; */

/*@ public model BSet<Integer> contents;
    public model BRelation<Integer,Integer> editp;
    public model BRelation<Integer,Integer> owner;
    public model BRelation<Integer,Integer> pages;
    public model BSet<Integer> persons;
    public model BRelation<Integer,Integer> viewp; */

/*@ public invariant
      persons.isSubset(PERSON) && contents.isSubset(CONTENTS) && owner.isaFunction()
   && owner.domain().equals(contents) && owner.range().equals(persons)
   && pages.domain().equals(contents) && pages.range().equals(persons) && owner.isSubset(pages)
   && viewp.domain().isSubset(contents) && viewp.range().isSubset(persons)
   && editp.domain().isSubset(contents) && editp.range().isSubset(persons)
   && owner.isSubset(viewp) && owner.isSubset(editp) && editp.isSubset(viewp)
   && pages.isSubset(viewp); */

/*@ initially
      persons.isEmpty() && contents.isEmpty() && owner.isEmpty() && pages.isEmpty()
   && viewp.isEmpty() && editp.isEmpty(); */

/*@ assignable \nothing;
    ensures \result <==> (\exists Integer p1; (\exists Integer c1; (PERSON.difference(persons).has(p1)
       && CONTENTS.difference(contents).has(c1)))); */
public abstract boolean guard_create_account();

/*@ requires guard_create_account();
    assignable contents, persons, owner, pages, viewp, editp;
    ensures (\exists Integer p1; (\exists Integer c1; \old(PERSON.difference(persons).has(p1)
       && CONTENTS.difference(contents).has(c1))
       && contents.equals(\old(contents.union(new BSet<Integer>(c1))))
       && persons.equals(\old(persons.union(new BSet<Integer>(p1))))
       && owner.equals(\old(owner.union(new BRelation<Integer,Integer>(new JMLEqualsEqualsPair<Integer,Integer>(c1,p1)))))
       && pages.equals(\old(pages.union(new BRelation<Integer,Integer>(new JMLEqualsEqualsPair<Integer,Integer>(c1,p1)))))
       && viewp.equals(\old(viewp.union(new BRelation<Integer,Integer>(new JMLEqualsEqualsPair<Integer,Integer>(c1,p1)))))
       && editp.equals(\old(editp.union(new BRelation<Integer,Integer>(new JMLEqualsEqualsPair<Integer,Integer>(c1,p1)))))));
also
    requires !guard_create_account();
    assignable \nothing;
    ensures true; */
public abstract void run_create_account();

/*@ assignable \nothing;
    ensures \result <==> (\exists Integer c1; (\exists Integer p1; (\exists Integer newc; (contents.has(c1)
       && persons.has(p1) && owner.apply(c1) == p1
       && CONTENTS.difference(contents).has(newc))))); */
public abstract boolean guard_edit_owned();

/*@ requires guard_edit_owned();
    assignable contents, pages, owner, viewp, editp;
    ensures (\exists Integer c1; (\exists Integer p1; (\exists Integer newc; \old(contents.has(c1)
       && persons.has(p1) && owner.apply(c1) == p1 && CONTENTS.difference(contents).has(newc))
       && contents.equals(\old(contents.difference(new BSet<Integer>(c1)).union(new BSet<Integer>(newc))))
       && pages.equals(\old(pages.domainSubtraction(new BSet<Integer>(c1)).union(Utils.cross(new BSet<Integer>(newc), pages.image(new BSet<Integer>(c1))))))
       && owner.equals(\old(owner.domainSubtraction(new BSet<Integer>(c1)).union(new BRelation<Integer,Integer>(new JMLEqualsEqualsPair<Integer,Integer>(newc,p1)))))
       && viewp.equals(\old(viewp.domainSubtraction(new BSet<Integer>(c1)).union(Utils.cross(new BSet<Integer>(newc), viewp.image(new BSet<Integer>(c1))))))
       && editp.equals(\old(editp.domainSubtraction(new BSet<Integer>(c1)).union(new BRelation<Integer,Integer>(new JMLEqualsEqualsPair<Integer,Integer>(newc,p1))))))));
also
    requires !guard_edit_owned();
    assignable \nothing;
    ensures true; */
public abstract void run_edit_owned();
}
