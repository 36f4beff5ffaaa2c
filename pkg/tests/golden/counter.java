import poporo.models.JML.*;
import org.jmlspecs.models.JMLEqualsEqualsPair;

public abstract class counter {
/*@ public model Integer v; */

/*@ public invariant
      true; */

/*@ initially
      v == 0; */

/*@ assignable \nothing;
    ensures \result <==> v == 0; */
public abstract boolean guard_incr();

/*@ requires guard_incr();
    assignable v;
    ensures \old(v == 0) && v == \old(1);
also
    requires !guard_incr();
    assignable \nothing;
    ensures true; */
public abstract void run_incr();
}
